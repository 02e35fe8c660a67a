"""Lane-change intention prediction from highway trajectories.

Labels trajectories into No-LC / Left-LC / Right-LC windows, extracts
physics-informed features, learns bidirectional LSTM embeddings and
classifies the fused representation with histogram gradient-boosted trees.
"""
__version__ = "0.1.0"
