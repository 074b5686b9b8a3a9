"""Pure numpy/scipy implementations of the kernels in ``_kernels.pyx``.

Used when the compiled extension is unavailable or ``PERCOLAB_BACKEND=python``.
Results are identical to the compiled kernels; only speed differs.
"""
import numpy as np
from scipy import ndimage

NAME = "python"

_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)
_COORD = np.uint64(0xD6E8FEB86659FD93)
_S30, _S27, _S31 = np.uint64(30), np.uint64(27), np.uint64(31)


def mix64(z):
    z = (z ^ (z >> _S30)) * _C1
    z = (z ^ (z >> _S27)) * _C2
    return z ^ (z >> _S31)


def _split_threshold(thr):
    if thr >= 1 << 64:
        return None
    if thr < 0:
        raise ValueError("negative threshold")
    return np.uint64(thr)


def uniforms(key, lo, shape):
    d = len(shape)
    if d < 1 or any(s < 1 for s in shape):
        raise ValueError("empty region")
    h = np.full((1,) * d, key, dtype=np.uint64)
    with np.errstate(over="ignore"):
        for a in range(d):
            c = np.arange(lo[a], lo[a] + shape[a], dtype=np.int64).astype(np.uint64)
            c = c.reshape([-1 if b == a else 1 for b in range(d)])
            h = mix64(h ^ (c * _COORD))
    return np.ascontiguousarray(np.broadcast_to(h, tuple(shape)))


def sample(key, lo, shape, thr, within=None):
    t = _split_threshold(thr)
    if t is None:
        out = np.ones(tuple(shape), dtype=bool)
    else:
        out = uniforms(key, lo, shape) < t
    if within is not None:
        out &= np.asarray(within, dtype=bool).reshape(out.shape)
    return out


def label(active):
    arr = np.asarray(active, dtype=bool)
    if arr.size == 0:
        return np.zeros(arr.shape, dtype=np.int32), 0
    structure = ndimage.generate_binary_structure(arr.ndim, 1)
    labels, count = ndimage.label(arr, structure=structure)
    return labels.astype(np.int32, copy=False), int(count)


def _count_touching(flat_labels, a_idx, b_idx, k):
    la = flat_labels[a_idx]
    lb = flat_labels[b_idx]
    common = np.intersect1d(la[la > 0], lb[lb > 0])
    return min(len(common), k)


def touch_indicators(keys, lo, shape, thr, within, a_idx, b_idx, k, negate):
    w = np.asarray(within, dtype=bool).reshape(tuple(shape))
    a_idx = np.asarray(a_idx, dtype=np.int64)
    b_idx = np.asarray(b_idx, dtype=np.int64)
    out = np.zeros(len(keys), dtype=np.uint8)
    for t, key in enumerate(np.asarray(keys, dtype=np.uint64)):
        active = sample(int(key), lo, shape, thr, w)
        labels, _ = label(active)
        hit = _count_touching(labels.reshape(-1), a_idx, b_idx, k) >= k
        out[t] = hit != bool(negate)
    return out


def _edges(shape, w_sites):
    """Neighbour pairs among the enumerated sites, as positions in ``w_sites``."""
    pos = {int(f): i for i, f in enumerate(w_sites)}
    strides = np.cumprod((list(shape[1:]) + [1])[::-1])[::-1]
    edges = []
    for i, f in enumerate(w_sites):
        coords = np.unravel_index(int(f), shape)
        for a, st in enumerate(strides):
            if coords[a] > 0 and int(f) - int(st) in pos:
                edges.append((pos[int(f) - int(st)], i))
    return edges


def enumerate_touch(shape, within, a_idx, b_idx, k, negate, batch=1 << 15):
    wflat = np.asarray(within, dtype=bool).reshape(-1)
    w_sites = np.flatnonzero(wflat)
    s = len(w_sites)
    if s > 62:
        raise ValueError("too many sites to enumerate")
    pos = {int(f): i for i, f in enumerate(w_sites)}
    a_pos = np.array([pos[int(f)] for f in a_idx if int(f) in pos], dtype=np.int64)
    b_pos = np.array([pos[int(f)] for f in b_idx if int(f) in pos], dtype=np.int64)
    edges = _edges(tuple(shape), w_sites)
    counts = np.zeros(s + 1, dtype=np.int64)
    total = 1 << s
    bits = np.arange(s, dtype=np.uint64)
    for start in range(0, total, batch):
        c = np.arange(start, min(start + batch, total), dtype=np.uint64)
        st = ((c[:, None] >> bits[None, :]) & np.uint64(1)).astype(bool)
        # min-label propagation until fixed point; closed sites carry label s
        lab = np.where(st, np.arange(s, dtype=np.int64)[None, :], s)
        changed = True
        while changed:
            changed = False
            for u, v in edges:
                both = st[:, u] & st[:, v]
                m = np.minimum(lab[:, u], lab[:, v])
                nu = np.where(both, m, lab[:, u])
                nv = np.where(both, m, lab[:, v])
                if not changed and (np.any(nu != lab[:, u]) or np.any(nv != lab[:, v])):
                    changed = True
                lab[:, u] = nu
                lab[:, v] = nv
        rows = np.arange(len(c))[:, None]
        has_a = np.zeros((len(c), s + 1), dtype=bool)
        has_b = np.zeros((len(c), s + 1), dtype=bool)
        if len(a_pos):
            has_a[rows, lab[:, a_pos]] = True
        if len(b_pos):
            has_b[rows, lab[:, b_pos]] = True
        n_touch = (has_a[:, :s] & has_b[:, :s]).sum(axis=1)
        hit = (n_touch >= k) != bool(negate)
        pc = st.sum(axis=1)
        counts += np.bincount(pc[hit], minlength=s + 1)
    return counts
