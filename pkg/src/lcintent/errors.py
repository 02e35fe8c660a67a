"""Exception hierarchy.

Everything raised on purpose by this package derives from ``LCIntentError``.
Bad inputs raise a ``ValidationError`` subclass (the CLI maps these to exit
code 1); failures during an otherwise valid computation raise
``RuntimeFailure`` (exit code 2).
"""


class LCIntentError(Exception):
    pass


class ValidationError(LCIntentError, ValueError):
    pass


class RuntimeFailure(LCIntentError, RuntimeError):
    pass


# data
class MissingColumn(ValidationError):
    def __init__(self, name):
        super().__init__(f"missing required column {name!r}")
        self.name = name


class NonMonotonicFrames(ValidationError):
    def __init__(self, track_id):
        super().__init__(f"frames of track {track_id} are not strictly increasing with unit stride")
        self.track_id = track_id


class EmptyRecording(ValidationError):
    pass


class InfeasibleConfig(ValidationError):
    pass


class IoFailure(RuntimeFailure):
    pass


# labeling
class MissingLateralData(ValidationError):
    pass


class SameLane(ValidationError):
    pass


class OutOfRange(ValidationError):
    pass


class TrackTooShort(ValidationError):
    pass


# features
class TooFewFrames(ValidationError):
    pass


class SchemaMismatch(ValidationError):
    pass


# imbalance
class TooFewSamples(ValidationError):
    pass


class EmptyClass(ValidationError):
    pass


class DegenerateInput(ValidationError):
    pass


# gbdt
class EmptyMatrix(ValidationError):
    pass


class InvalidFractions(ValidationError):
    pass


class SingleClass(ValidationError):
    pass


# bilstm
class ShapeMismatch(ValidationError):
    pass


class EmptySequence(ValidationError):
    pass


class NonFiniteLoss(RuntimeFailure):
    pass


# pipeline / evaluation
class UnassignedLocation(ValidationError):
    pass


class TooFewSamplesPerClass(ValidationError):
    pass


class EmptySpace(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class EmptyInput(ValidationError):
    pass
