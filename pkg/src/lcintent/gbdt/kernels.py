"""Compiled inner loops for histogram boosting."""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def build_histograms(Xb, idx, g, h, n_slots):
    """Gradient sum, Hessian sum and count per (feature, bin) over rows ``idx``."""
    n_feat = Xb.shape[1]
    G = np.zeros((n_feat, n_slots))
    H = np.zeros((n_feat, n_slots))
    C = np.zeros((n_feat, n_slots), dtype=np.int64)
    for ii in range(idx.shape[0]):
        i = idx[ii]
        gi = g[i]
        hi = h[i]
        for f in range(n_feat):
            b = Xb[i, f]
            G[f, b] += gi
            H[f, b] += hi
            C[f, b] += 1
    return G, H, C


@njit(cache=True)
def gain(gl, hl, gr, hr, lam, gamma):
    return 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - (gl + gr) ** 2 / (hl + hr + lam)) - gamma


@njit(cache=True)
def find_best_split(G, H, C, n_bins, missing_bin, lam, gamma, min_leaf):
    """Best (feature, bin, missing_left, gain); feature is -1 when no split has positive gain.

    Candidates are visited by feature, then bin, then missing-left before
    missing-right, and only a strictly larger gain replaces the incumbent.
    """
    best_f = -1
    best_b = -1
    best_ml = False
    best_gain = 0.0
    for f in range(G.shape[0]):
        nb = n_bins[f]
        gm = G[f, missing_bin]
        hm = H[f, missing_bin]
        cm = C[f, missing_bin]
        gt = gm
        ht = hm
        ct = cm
        for b in range(nb):
            gt += G[f, b]
            ht += H[f, b]
            ct += C[f, b]
        gl = 0.0
        hl = 0.0
        cl = 0
        for b in range(nb):
            gl += G[f, b]
            hl += H[f, b]
            cl += C[f, b]
            for side in range(2):
                if side == 0:
                    gls = gl + gm
                    hls = hl + hm
                    cls_ = cl + cm
                else:
                    gls = gl
                    hls = hl
                    cls_ = cl
                if cls_ < min_leaf or ct - cls_ < min_leaf:
                    continue
                v = gain(gls, hls, gt - gls, ht - hls, lam, gamma)
                if v > best_gain:
                    best_gain = v
                    best_f = f
                    best_b = b
                    best_ml = side == 0
    return best_f, best_b, best_ml, best_gain


@njit(cache=True)
def partition(Xb, idx, feature, threshold, missing_left, missing_bin):
    mask = np.empty(idx.shape[0], dtype=np.bool_)
    for ii in range(idx.shape[0]):
        b = Xb[idx[ii], feature]
        if b == missing_bin:
            mask[ii] = missing_left
        else:
            mask[ii] = b <= threshold
    return idx[mask], idx[~mask]


@njit(cache=True)
def predict_tree(Xb, feature, threshold, missing_left, left, right, value, missing_bin):
    out = np.empty(Xb.shape[0])
    for i in range(Xb.shape[0]):
        node = 0
        while left[node] >= 0:
            b = Xb[i, feature[node]]
            if b == missing_bin:
                go_left = missing_left[node]
            else:
                go_left = b <= threshold[node]
            node = left[node] if go_left else right[node]
        out[i] = value[node]
    return out
