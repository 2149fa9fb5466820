"""Compiled Glauber sweep over the flat graph layout."""

import math

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def sigmoid(t):
    if t >= 0.0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


@njit(cache=True, nogil=True)
def glauber_sweeps(
    words, deg, active, family, n_bits, word_off, deg_off, label_off, lu, lv,
    const, wu, wv, uniforms, n_sweeps,
):
    """Run ``n_sweeps`` systematic scans over the active subgraphs in place.

    ``const[f] + wu[f, deg0(u)] + wv[f, deg0(v)]`` is the log-odds of label
    ``(u, v)`` in family ``f``.  Consumes one uniform per visited label, in
    scan order, and returns the number consumed.
    """
    pos = 0
    for _ in range(n_sweeps):
        for s in range(len(n_bits)):
            if not active[s]:
                continue
            f = family[s]
            c = const[f]
            w0 = word_off[s]
            d0 = deg_off[s]
            l0 = label_off[s]
            for i in range(n_bits[s]):
                a = d0 + lu[l0 + i]
                b = d0 + lv[l0 + i]
                w = w0 + (i >> 6)
                mask = np.uint64(1) << np.uint64(i & 63)
                bit = 1 if (words[w] & mask) != 0 else 0
                t = c + wu[f, deg[a] - bit] + wv[f, deg[b] - bit]
                new = 1 if uniforms[pos] < sigmoid(t) else 0
                pos += 1
                if new != bit:
                    if new:
                        words[w] |= mask
                        deg[a] += 1
                        deg[b] += 1
                    else:
                        words[w] &= ~mask
                        deg[a] -= 1
                        deg[b] -= 1
    return pos
