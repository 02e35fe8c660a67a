"""Plot-ready distribution tables for the gaps around lane-change starts."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .data.types import NEIGHBOR_POSITIONS
from .features.interaction import NeighborStats, event_samples, fit_neighbor_stats

DIST_EDGES = tuple(float(e) for e in np.arange(0.0, 160.0 + 1e-9, 10.0))
DV_EDGES = tuple(float(e) for e in np.arange(-15.0, 15.0 + 1e-9, 2.5))
BAND_COLUMNS = ("position", "count", "mu", "sigma", "lo_1sigma", "hi_1sigma", "lo_2sigma", "hi_2sigma")
HIST_COLUMNS = ("position", "dist_lo", "dist_hi", "dv_lo", "dv_hi", "count")


@dataclass
class DistributionTables:
    """``bands``: one row per position with at least one sample.
    ``histogram``: nonzero cells of the distance x speed-difference histogram
    per position; values outside the fixed edges are not counted."""

    bands: list
    histogram: list

    def is_empty(self) -> bool:
        return not self.bands and not self.histogram

    def bands_csv(self) -> str:
        return _csv(BAND_COLUMNS, self.bands)

    def histogram_csv(self) -> str:
        return _csv(HIST_COLUMNS, self.histogram)


def _csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in columns])
    return buf.getvalue()


def emit_distribution_stats(
    recordings,
    events_by_recording: dict,
    stats: NeighborStats = None,
    locations=None,
    dist_edges=DIST_EDGES,
    dv_edges=DV_EDGES,
) -> DistributionTables:
    """Mean, standard deviation and sigma bands of the gap per neighbour
    position, plus the joint (gap, speed difference) histogram.

    ``stats`` defaults to statistics fitted on the same recordings.
    """
    if stats is None:
        stats = fit_neighbor_stats(recordings, events_by_recording, locations)
    samples = event_samples(recordings, events_by_recording, locations)
    bands, hist = [], []
    for pos in NEIGHBOR_POSITIONS:
        st = stats.get(pos)
        if st is not None and st.count > 0:
            bands.append(
                {
                    "position": pos,
                    "count": st.count,
                    "mu": st.mu,
                    "sigma": st.sigma,
                    "lo_1sigma": st.mu - st.sigma,
                    "hi_1sigma": st.mu + st.sigma,
                    "lo_2sigma": st.mu - 2 * st.sigma,
                    "hi_2sigma": st.mu + 2 * st.sigma,
                }
            )
        if not samples[pos]:
            continue
        rows = np.asarray(samples[pos])
        counts, _, _ = np.histogram2d(rows[:, 0], rows[:, 1], bins=(np.asarray(dist_edges), np.asarray(dv_edges)))
        for i, j in zip(*np.nonzero(counts)):
            hist.append(
                {
                    "position": pos,
                    "dist_lo": float(dist_edges[i]),
                    "dist_hi": float(dist_edges[i + 1]),
                    "dv_lo": float(dv_edges[j]),
                    "dv_hi": float(dv_edges[j + 1]),
                    "count": int(counts[i, j]),
                }
            )
    return DistributionTables(bands, hist)
