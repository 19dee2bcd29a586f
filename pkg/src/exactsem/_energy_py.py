"""Numpy implementation of the permutation energy kernels (used when the extension is absent)."""
import numpy as np

_CHUNK = 16
_STEP_BLOCK = 4096
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def permutation_labels(seeds, n, n_a):
    """One random relabelling per seed: row ``p`` marks ``n_a`` of ``n`` items with 1.

    Bit-for-bit the same partial Fisher-Yates as the compiled kernel, with the
    swaps of all permutations done together.
    """
    seeds = np.asarray(seeds, dtype=np.uint64)
    P = len(seeds)
    out = np.zeros((P, n), dtype=np.int8)
    if P == 0 or n_a == 0:
        return out
    perm = np.tile(np.arange(n, dtype=np.int64), (P, 1))
    rows = np.arange(P)
    for start in range(0, n_a, _STEP_BLOCK):
        steps = np.arange(start, min(start + _STEP_BLOCK, n_a))
        z = seeds[:, None] + (steps + 1).astype(np.uint64)[None, :] * _GOLDEN
        u = (_mix(z) >> np.uint64(11)).astype(float) * (1.0 / 9007199254740992.0)
        jumps = steps + (u * (n - steps).astype(float)).astype(np.int64)
        for c, i in enumerate(steps):
            j = jumps[:, c]
            held = perm[:, i].copy()
            perm[:, i] = perm[rows, j]
            perm[rows, j] = held
    out[rows[:, None], perm[:, :n_a]] = 1
    return out


def permutation_energy(sorted_values, order, labels, n_a):
    """Energy statistic for every row of ``labels`` (1 = first sample).

    Same contract as the compiled kernel: ``sorted_values[k]`` is the pooled
    sample projected on direction ``k`` in ascending order, ``order[k]`` the
    pooled indices producing it.
    """
    sorted_values = np.asarray(sorted_values, dtype=float)
    labels = np.asarray(labels)
    K, N = sorted_values.shape
    n_b = N - n_a
    if n_a < 1 or n_b < 1:
        raise ValueError("both samples must be non-empty")
    ranks = 2.0 * np.arange(N) - N + 1.0
    totals = sorted_values @ ranks
    out = np.zeros(labels.shape[0])
    for start in range(0, labels.shape[0], _CHUNK):
        block = labels[start:start + _CHUNK]
        acc = np.zeros(block.shape[0])
        for k in range(K):
            z = sorted_values[k]
            a = block[:, order[k]].astype(float)
            w = []
            for m, size in ((a, n_a), (1.0 - a, n_b)):
                before = np.cumsum(m, axis=1) - m
                w.append(2.0 * np.sum(m * z * before, axis=1) - (size - 1.0) * (m @ z))
            cross = totals[k] - w[0] - w[1]
            acc += 2.0 * cross / (n_a * n_b) - 2.0 * w[0] / n_a**2 - 2.0 * w[1] / n_b**2
        out[start:start + block.shape[0]] = acc / K * (n_a * n_b / (n_a + n_b))
    return out
