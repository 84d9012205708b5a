"""Pure numpy implementation of the simulation kernels.

This is the fallback used when the compiled extension is unavailable, and
the reference the extension is tested against.  Both perform the same
floating point operations in the same order (sequential sums, stable
ordering by ``(key, index)``), so traces agree bit for bit.
"""

import numpy as np

from .algorithms import (
    GAIN_CYCLE,
    KIND_ADDITIVE,
    KIND_BBR_CYCLE,
    KIND_BBR_INCREMENT,
    KIND_RANDOMIZED_RENO,
    KIND_SCALABLE,
    SCALABLE_GROWTH,
)

SYNC_MINIMAL = 0
SYNC_SQRT_EXTRA = 1
SYNC_FULL = 2
SYNC_BERNOULLI = 3
SYNC_LARGEST_FIRST = 4
SYNC_ECN = 5

_GAINS = np.array(GAIN_CYCLE)

BACKEND = "python"


def minimal_prefix(w, order):
    """Length of the shortest prefix of ``order`` whose members, if all
    halved, stop the aggregate window from growing: ``k >= n / (1 + w_min/2)``
    with ``w_min`` the smallest window in the prefix."""
    n = len(w)
    cm = np.minimum.accumulate(np.asarray(w)[order])
    need = np.ceil(n / (1.0 + cm / 2.0))
    hits = np.flatnonzero(np.arange(1, n + 1) >= need)
    return int(hits[0]) + 1 if hits.size else n


def run_block(w, phase, base, sel_u, react_u, kind, beta, floor, lo, hi,
              bdp, buffer, sync_code, sync_p, sync_k, ecn_threshold, extra,
              cap, out_W, out_loss, out_mark, out_nd, out_wmin, out_wmax,
              out_dmin, out_adj, rec_w, rec_d, t0):
    n = w.shape[0]
    recording = rec_w.shape[0] > 0
    full_level = bdp + buffer
    for j in range(sel_u.shape[0]):
        t = t0 + j
        W = np.cumsum(w)[-1]
        out_W[t] = W
        out_wmin[t] = w.min()
        out_wmax[t] = w.max()
        if recording:
            rec_w[t] = w
        loss = W >= full_level
        mark = sync_code == SYNC_ECN and W >= bdp + ecn_threshold
        out_loss[t] = loss
        out_mark[t] = mark

        signal = np.zeros(n, dtype=bool)
        if loss or mark:
            if sync_code == SYNC_LARGEST_FIRST:
                order = np.argsort(-w, kind="stable")
            else:
                order = np.argsort(sel_u[j], kind="stable")
            if sync_code == SYNC_MINIMAL:
                size = minimal_prefix(w, order)
            elif sync_code == SYNC_SQRT_EXTRA:
                size = min(n, minimal_prefix(w, order) + extra)
            elif sync_code == SYNC_FULL:
                size = n
            elif sync_code == SYNC_BERNOULLI:
                size = int(np.count_nonzero(sel_u[j] < sync_p))
            else:
                size = min(n, sync_k)
            size = min(size, cap)
            signal[order[:size]] = True

        before = w.copy()
        if kind == KIND_ADDITIVE:
            dec = signal
            w[:] = np.where(signal, w * beta, w + 1.0)
        elif kind == KIND_SCALABLE:
            dec = signal
            w[:] = np.where(signal, w * beta, w * SCALABLE_GROWTH)
        elif kind == KIND_RANDOMIZED_RENO:
            dec = signal & (react_u[j] < 1.0 / w)
            w[:] = np.where(dec, w * 0.5, np.where(signal, w, w + 1.0))
        elif kind == KIND_BBR_CYCLE:
            if loss:
                w *= full_level / W
            dec = signal & (phase == 0)
            phase[:] = (phase + 1) % 8
            w += (_GAINS[phase] - 1.0) * base
        elif kind == KIND_BBR_INCREMENT:
            if loss:
                w *= full_level / W
            r = react_u[j]
            step = np.where(r < 0.125, -0.25 * base,
                            np.where(r < 0.25, 0.25 * base, 0.0))
            step = np.where(signal, step, 0.0)
            dec = step < 0.0
            w += step
        else:
            raise ValueError(f"unknown algorithm code {kind}")

        adjusted = w < floor
        w[:] = np.maximum(w, floor)
        adjusted |= (w < lo) | (w > hi)
        w[:] = np.minimum(np.maximum(w, lo), hi)

        nd = int(np.count_nonzero(dec))
        out_nd[t] = nd
        out_dmin[t] = before[dec].min() if nd else np.nan
        out_adj[t] = int(np.count_nonzero(adjusted))
        if recording:
            rec_d[t] = dec


def appendix_c_violations(windows):
    """Check every subset of every row of ``windows`` (integers, n <= 16).

    For each subset ``D`` large enough that ``|D| >= ceil(n / (1 + w_min/2))``
    the one-slot Reno update must not grow the aggregate window.  Returns
    ``(subsets_checked, violations)``.
    """
    windows = np.asarray(windows, dtype=np.int64)
    m, n = windows.shape
    checked = 0
    violations = 0
    for mask in range(1, 1 << n):
        cols = [i for i in range(n) if mask >> i & 1]
        sub = windows[:, cols]
        size = len(cols)
        total = sub.sum(axis=1)
        wmin = sub.min(axis=1)
        need = (2 * n + 1 + wmin) // (2 + wmin)  # ceil(2n / (2 + wmin))
        ok = size >= need
        checked += int(np.count_nonzero(ok))
        # 2 * (W(t+1) - W(t)) = 2 * (n - |D|) - sum_D w_i
        grows = 2 * (n - size) - total > 0
        violations += int(np.count_nonzero(ok & grows))
    return checked, violations
