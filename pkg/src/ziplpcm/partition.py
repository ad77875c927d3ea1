"""Canonical labelling of partitions.

Labels are 1-based in the public API: node 1 is in group 1 and every new
label is the smallest one not used so far, so two label vectors describing
the same partition are identical after :func:`canonical`.
"""

import numpy as np


def canonical(z):
    """Relabel ``z`` in first-use order with labels ``1..K``."""
    z = np.asarray(z)
    out = np.empty(z.shape[0], dtype=np.int64)
    seen = {}
    for i, label in enumerate(z.tolist()):
        if label not in seen:
            seen[label] = len(seen) + 1
        out[i] = seen[label]
    return out


def is_canonical(z):
    z = np.asarray(z)
    if z.ndim != 1 or z.size == 0:
        return False
    return bool(np.array_equal(z, canonical(z)))


def group_sizes(z):
    """Sizes of groups ``1..K`` of a canonical partition."""
    z = np.asarray(z, dtype=np.int64)
    return np.bincount(z - 1)


def enumerate_partitions(n):
    """Yield every canonical partition of ``n`` nodes (restricted growth strings)."""
    if n == 0:
        return
    z = [1] * n

    def rec(i, k):
        if i == n:
            yield np.array(z, dtype=np.int64)
            return
        for label in range(1, k + 2):
            z[i] = label
            yield from rec(i + 1, max(k, label))

    z[0] = 1
    yield from rec(1, 1)


def rle_encode(z):
    """Run-length encode a label vector as ``label x count`` tokens."""
    z = np.asarray(z).tolist()
    if not z:
        return ""
    parts = []
    cur, run = z[0], 1
    for v in z[1:]:
        if v == cur:
            run += 1
        else:
            parts.append(f"{cur}x{run}")
            cur, run = v, 1
    parts.append(f"{cur}x{run}")
    return ";".join(parts)


def rle_decode(text):
    out = []
    for tok in text.split(";"):
        label, run = tok.split("x")
        out.extend([int(label)] * int(run))
    return np.array(out, dtype=np.int64)
