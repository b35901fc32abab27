"""Pure-numpy twins of the compiled kernels (same semantics, fixed order)."""

import numpy as np


def csr_matvec(row_offsets, col_indices, values, x):
    """y = A @ x for CSR data."""
    n = len(row_offsets) - 1
    out = np.zeros(n, dtype=np.float64)
    if len(values) == 0:
        return out
    prod = values * x[col_indices]
    counts = np.diff(row_offsets)
    nonempty = counts > 0
    out[nonempty] = np.add.reduceat(prod, row_offsets[:-1][nonempty])
    return out


def tri_abs_integral(va, vb, vc, area):
    """Per-triangle integral of |v| for affine v with vertex values (va, vb, vc)."""
    vals = np.sort(np.stack((va, vb, vc), axis=1), axis=1)
    a, b, c = vals[:, 0], vals[:, 1], vals[:, 2]
    s = a + b + c
    base = area * s / 3.0
    out = np.empty(len(a), dtype=np.float64)

    m_pos = a >= 0.0
    m_neg = ~m_pos & (c <= 0.0)
    m_one = ~m_pos & ~m_neg & (b >= 0.0)   # one negative vertex
    m_two = ~m_pos & ~m_neg & ~m_one       # two negative vertices

    out[m_pos] = base[m_pos]
    out[m_neg] = -base[m_neg]
    if np.any(m_one):
        aa, bb, cc = a[m_one], b[m_one], c[m_one]
        cap = 2.0 * area[m_one] * aa ** 3 / (3.0 * (aa - bb) * (aa - cc))
        out[m_one] = base[m_one] - cap
    if np.any(m_two):
        aa, bb, cc = a[m_two], b[m_two], c[m_two]
        cap = 2.0 * area[m_two] * cc ** 3 / (3.0 * (cc - aa) * (cc - bb))
        out[m_two] = cap - base[m_two]
    return out
