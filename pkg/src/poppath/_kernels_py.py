"""Pure-Python trajectory scan kernels.

Same signatures and results as the compiled ``_kernels`` module. Trajectories
arrive flattened: ``flat`` holds every POI back to back and trajectory ``t``
occupies ``flat[offsets[t]:offsets[t + 1]]``.
"""
import numpy as np


def find_windows(flat, offsets, source, destination):
    """Return ``(start, stop)`` slices that begin at ``source`` and end at the
    first following ``destination``, one per occurrence of ``source``."""
    seq = flat.tolist() if hasattr(flat, "tolist") else list(flat)
    offs = offsets.tolist() if hasattr(offsets, "tolist") else list(offsets)
    out = []
    for t in range(len(offs) - 1):
        lo, hi = offs[t], offs[t + 1]
        next_d = -1
        found = []
        for i in range(hi - 1, lo - 1, -1):
            x = seq[i]
            if x == source and next_d >= 0:
                found.append((i, next_d + 1))
            if x == destination:
                next_d = i
        found.reverse()
        out.extend(found)
    return out


def precedence_matrix(dense, offsets, n):
    """``m[a, b] == 1`` iff ``a`` occurs strictly before ``b`` in some trajectory."""
    seq = dense.tolist() if hasattr(dense, "tolist") else list(dense)
    offs = offsets.tolist() if hasattr(offsets, "tolist") else list(offsets)
    m = np.zeros((n, n), dtype=np.uint8)
    seen = set()
    for t in range(len(offs) - 1):
        lo, hi = offs[t], offs[t + 1]
        for i in range(lo, hi):
            a = seq[i]
            for j in range(i + 1, hi):
                seen.add((a, seq[j]))
    for a, b in seen:
        if a != b:
            m[a, b] = 1
    return m


def pair_counts(dense, offsets, n):
    """Consecutive-pair counts ``(n, n)`` and per-POI occurrence counts ``(n,)``."""
    seq = dense.tolist() if hasattr(dense, "tolist") else list(dense)
    offs = offsets.tolist() if hasattr(offsets, "tolist") else list(offsets)
    seg = np.zeros((n, n), dtype=np.int64)
    poi = np.zeros(n, dtype=np.int64)
    for t in range(len(offs) - 1):
        lo, hi = offs[t], offs[t + 1]
        prev = -1
        for i in range(lo, hi):
            x = seq[i]
            poi[x] += 1
            if i > lo:
                seg[prev, x] += 1
            prev = x
    return seg, poi
