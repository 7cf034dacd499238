"""Compiled inner loops for depth evaluation and envelope construction.

Everything here works on raw arrays: ``values`` (n, T) float with NaN where
unobserved, ``mask`` (n, T) bool, ``w`` (T,) quadrature weights.
"""

import numpy as np
from numba import njit

FM = 0
MBD2 = 1

SEED = 0
ENVELOPMENT = 1
COVERAGE = 2
BOTH = 3


@njit(cache=True)
def depth_from_counts(kind, below, tied, total):
    if kind == FM:
        f = (below + tied) / total
        return 1.0 - abs(0.5 - f)
    if total < 2:
        return 1.0
    above = total - below - tied
    # bands (pairs of distinct curves) whose pointwise range contains x
    pairs = total * (total - 1) / 2.0
    outside = below * (below - 1) / 2.0 + above * (above - 1) / 2.0
    return (pairs - outside) / pairs


@njit(cache=True)
def poifd_members(values, mask, w, i, member, kind):
    """Depth of curve ``i`` restricted to its observed set, within ``member`` plus ``i``."""
    n, T = values.shape
    num = 0.0
    den = 0.0
    for t in range(T):
        if not mask[i, t]:
            continue
        x = values[i, t]
        below = 0
        tied = 0
        total = 0
        for j in range(n):
            if (member[j] or j == i) and mask[j, t]:
                v = values[j, t]
                total += 1
                if v < x:
                    below += 1
                elif v == x:
                    tied += 1
        d = depth_from_counts(kind, below, tied, total)
        num += w[t] * d * total
        den += w[t] * total
    return num / den


@njit(cache=True)
def build_envelope(values, mask, w, i, order, kind):
    """Iterative depth-guarded envelope selection for focal curve ``i``.

    ``order`` lists candidate indices from nearest to farthest. Returns
    per-candidate arrays (batch number, admission position within the batch,
    admission reason, enveloped-measure gain, newly covered grid points) and
    per-iteration arrays (accepted flag, depth before, depth after). Depths
    are kept up to date from pointwise counts rather than recomputed.
    """
    T = values.shape[1]
    K = order.size
    removed = np.zeros(K, dtype=np.bool_)
    batch_of = np.full(K, -1, dtype=np.int64)
    admit_pos = np.full(K, -1, dtype=np.int64)
    reason = np.full(K, -1, dtype=np.int8)
    env_gain = np.zeros(K)
    cov_gain = np.zeros(K, dtype=np.int64)
    accepted = np.zeros(K, dtype=np.bool_)
    depth_before = np.zeros(K)
    depth_after = np.zeros(K)

    cov_j = np.zeros(T, dtype=np.bool_)
    # pointwise counts (below, tied, total) over accepted members plus the focal curve
    below_j = np.zeros(T, dtype=np.int64)
    tied_j = np.zeros(T, dtype=np.int64)
    total_j = np.zeros(T, dtype=np.int64)
    below_n = np.zeros(T, dtype=np.int64)
    tied_n = np.zeros(T, dtype=np.int64)
    total_n = np.zeros(T, dtype=np.int64)
    lo = np.empty(T)
    hi = np.empty(T)
    has = np.zeros(T, dtype=np.bool_)
    br = np.zeros(T, dtype=np.bool_)
    cov_n = np.zeros(T, dtype=np.bool_)
    xi = values[i]
    oi = mask[i]
    for t in range(T):
        if oi[t]:
            tied_j[t] = 1
            total_j[t] = 1
    # observed grid indices of each candidate, CSR layout
    ptr = np.zeros(K + 1, dtype=np.int64)
    for k in range(K):
        cnt = 0
        for t in range(T):
            if mask[order[k], t]:
                cnt += 1
        ptr[k + 1] = ptr[k] + cnt
    obs_idx = np.empty(ptr[K], dtype=np.int64)
    for k in range(K):
        q = ptr[k]
        for t in range(T):
            if mask[order[k], t]:
                obs_idx[q] = t
                q += 1

    depth_j = 0.0
    remaining = K
    it = 0
    while remaining >= 2:
        k0 = 0
        while removed[k0]:
            k0 += 1
        j0 = order[k0]
        batch = np.empty(remaining, dtype=np.int64)
        nb = 0
        batch[nb] = k0
        nb += 1
        batch_of[k0] = it
        admit_pos[k0] = 0
        reason[k0] = SEED
        g = 0.0
        c = 0
        for t in range(T):
            has[t] = False
            br[t] = False
            if oi[t] and mask[j0, t]:
                has[t] = True
                lo[t] = values[j0, t]
                hi[t] = values[j0, t]
                if lo[t] <= xi[t] <= hi[t]:
                    br[t] = True
                    g += w[t]
            cov_n[t] = cov_j[t] or mask[j0, t]
            if mask[j0, t] and not cov_j[t]:
                c += 1
        env_gain[k0] = g
        cov_gain[k0] = c

        for k in range(k0 + 1, K):
            if removed[k]:
                continue
            j = order[k]
            g = 0.0
            c = 0
            for q in range(ptr[k], ptr[k + 1]):
                t = obs_idx[q]
                if oi[t] and not br[t]:
                    v = values[j, t]
                    if has[t]:
                        a = min(lo[t], v)
                        b = max(hi[t], v)
                    else:
                        a = v
                        b = v
                    if a <= xi[t] <= b:
                        g += w[t]
                if not cov_n[t]:
                    c += 1
            if g > 0.0 or c > 0:
                for q in range(ptr[k], ptr[k + 1]):
                    t = obs_idx[q]
                    if oi[t]:
                        v = values[j, t]
                        if has[t]:
                            lo[t] = min(lo[t], v)
                            hi[t] = max(hi[t], v)
                        else:
                            lo[t] = v
                            hi[t] = v
                            has[t] = True
                        if lo[t] <= xi[t] <= hi[t]:
                            br[t] = True
                    cov_n[t] = True
                batch[nb] = k
                batch_of[k] = it
                admit_pos[k] = nb
                nb += 1
                env_gain[k] = g
                cov_gain[k] = c
                if g > 0.0 and c > 0:
                    reason[k] = BOTH
                elif g > 0.0:
                    reason[k] = ENVELOPMENT
                else:
                    reason[k] = COVERAGE

        for t in range(T):
            below_n[t] = below_j[t]
            tied_n[t] = tied_j[t]
            total_n[t] = total_j[t]
        for b in range(nb):
            jj = order[batch[b]]
            for t in range(T):
                if oi[t] and mask[jj, t]:
                    v = values[jj, t]
                    total_n[t] += 1
                    if v < xi[t]:
                        below_n[t] += 1
                    elif v == xi[t]:
                        tied_n[t] += 1
        num = 0.0
        den = 0.0
        for t in range(T):
            if oi[t]:
                d = depth_from_counts(kind, below_n[t], tied_n[t], total_n[t])
                num += w[t] * d * total_n[t]
                den += w[t] * total_n[t]
        d_new = num / den
        depth_before[it] = depth_j
        depth_after[it] = d_new
        if d_new >= depth_j:
            accepted[it] = True
            depth_j = d_new
            for t in range(T):
                below_j[t] = below_n[t]
                tied_j[t] = tied_n[t]
                total_j[t] = total_n[t]
                cov_j[t] = cov_n[t]
        for b in range(nb):
            removed[batch[b]] = True
        remaining -= nb
        it += 1

    return (batch_of, admit_pos, reason, env_gain, cov_gain,
            accepted[:it].copy(), depth_before[:it].copy(), depth_after[:it].copy())
