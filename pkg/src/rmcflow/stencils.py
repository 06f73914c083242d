"""Centered finite-difference kernels and a local polynomial sampler.

Every gridded field in this package lives on a uniform grid and carries a
definite parity at each end of its interval: profile functions are odd
across the rotation poles, curvature and metric-coefficient fields are
even.  Ghost extension by symmetry plus fixed centered stencils keeps all
derivatives vectorized and preserves full accuracy up to the boundary.

Two details matter elsewhere and are worth stating once:

* ``diff1`` accumulates antisymmetric pairs ``w_k * (f[i+k] - f[i-k])``, so
  it returns exactly 0.0 on data that is bitwise even about a node.  The
  coupled-flow fixed points rely on this.
* ``ProfileSampler`` evaluates off-grid points with a degree-7 local
  Lagrange polynomial, but detects queries that land on a grid node and
  dispatches those to the centered stencils, keeping the same symmetry
  guarantee for on-node queries.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

LD = np.longdouble

#: Ghost-cell width used for all parity extensions.  Eight cells cover the
#: widest stencil (9 points) and the 8-node interpolation window.
GHOST = 8


def _table(pairs):
    return np.array([LD(int(p)) / LD(int(q)) for p, q in pairs], dtype=LD)


#: 9-point first derivative, truncation order 8.
D1_9 = _table([(1, 280), (-4, 105), (1, 5), (-4, 5), (0, 1),
               (4, 5), (-1, 5), (4, 105), (-1, 280)])

#: 9-point second derivative, truncation order 8.
D2_9 = _table([(-1, 560), (8, 315), (-1, 5), (8, 5), (-205, 72),
               (8, 5), (-1, 5), (8, 315), (-1, 560)])

#: Savitzky-Golay quadratic-fit first derivative on 7 points.  Truncation
#: order 2 only, but the smallest noise amplification of any 7-point first
#: derivative; used where the data carries storage-precision noise.
SG1_7 = _table([(-3, 28), (-2, 28), (-1, 28), (0, 1),
                (1, 28), (2, 28), (3, 28)])

#: Savitzky-Golay quadratic-fit second derivative on 7 points.
SG2_7 = _table([(5, 42), (0, 1), (-3, 42), (-4, 42),
                (-3, 42), (0, 1), (5, 42)])

#: Plain 3-point kernels for curve-parameter derivatives.
D1_3 = _table([(-1, 2), (0, 1), (1, 2)])
D2_3 = _table([(1, 1), (-2, 1), (1, 1)])


def extend(values, parity, width=GHOST):
    """Pad an array with ghost nodes using the field's end symmetry.

    ``parity='even'`` mirrors values across each endpoint.  ``parity='odd'``
    point-reflects through the endpoint value, ``2*f[end] - f[mirror]``,
    which reduces to a sign flip when the field vanishes there and keeps the
    extension smooth even when roundoff leaves f[end] slightly off zero.
    """
    f = np.asarray(values)
    n = f.shape[0]
    if n <= width:
        raise ValueError(f"need more than {width} nodes to extend, got {n}")
    out = np.empty(n + 2 * width, dtype=f.dtype)
    out[width:width + n] = f
    left = f[1:width + 1][::-1]
    right = f[n - 1 - width:n - 1][::-1]
    if parity == "even":
        out[:width] = left
        out[width + n:] = right
    elif parity == "odd":
        out[:width] = 2 * f[0] - left
        out[width + n:] = 2 * f[-1] - right
    else:
        raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")
    return out


def diff1(ext, n, dx, weights=D1_9):
    """First derivative at the n physical nodes of an extended array.

    Accumulates antisymmetric pairs, so the result is exactly zero at any
    node about which the extended data is bitwise even.
    """
    half = len(weights) // 2
    width = (ext.shape[0] - n) // 2
    cast = ext.dtype.type
    out = np.zeros(n, dtype=ext.dtype)
    for k in range(1, half + 1):
        w = cast(weights[half + k])
        if w != 0:
            out += w * (ext[width + k:width + k + n]
                        - ext[width - k:width - k + n])
    return out / cast(dx)


def diff2(ext, n, dx, weights=D2_9):
    """Second derivative at the n physical nodes.

    Written through paired second differences w_k ((f_{i+k} - f_i) +
    (f_{i-k} - f_i)): a consistent symmetric stencil has center weight
    exactly -2 sum_{k>0} w_k, so the form is algebraically identical to
    the plain weighted sum but returns exact zero on constant data
    instead of a rounding residue amplified by 1/dx^2.
    """
    half = len(weights) // 2
    width = (ext.shape[0] - n) // 2
    cast = ext.dtype.type
    center = ext[width:width + n]
    out = np.zeros_like(center)
    for k in range(1, half + 1):
        w = cast(weights[half + k])
        if w != 0:
            out = out + w * ((ext[width + k:width + k + n] - center)
                             + (ext[width - k:width - k + n] - center))
    return out / (cast(dx) * cast(dx))


def d1_nonuniform(tm, t0, tp, fm, f0, fp):
    """First derivative at t0 from three samples at tm < t0 < tp."""
    hm = t0 - tm
    hp = tp - t0
    return (hm * hm * fp - hp * hp * fm + (hp * hp - hm * hm) * f0) \
        / (hm * hp * (hm + hp))


def d2_nonuniform(tm, t0, tp, fm, f0, fp):
    """Second derivative at t0 from three samples at tm < t0 < tp."""
    hm = t0 - tm
    hp = tp - t0
    return 2.0 * (hm * fp + hp * fm - (hm + hp) * f0) \
        / (hm * hp * (hm + hp))


def _lagrange_coefficients():
    """Exact monomial coefficients of the 8 cardinal polynomials on nodes
    0..7, recentered at the window midpoint 7/2 so that every Horner
    intermediate stays O(1), plus the derivative coefficient matrices."""
    from math import comb

    half = Fraction(7, 2)
    c0 = []
    for m in range(8):
        poly = [Fraction(1)]
        denom = Fraction(1)
        for k in range(8):
            if k == m:
                continue
            new = [Fraction(0)] * (len(poly) + 1)
            for p, c in enumerate(poly):
                new[p] += c * Fraction(-k)
                new[p + 1] += c
            poly = new
            denom *= Fraction(m - k)
        poly = [c / denom for c in poly]
        # substitute u = v + 7/2 to recentre on the window midpoint
        cent = [Fraction(0)] * 8
        for p, c in enumerate(poly):
            for q in range(p + 1):
                cent[q] += c * comb(p, q) * half ** (p - q)
        c0.append(cent)
    c1 = [[row[p] * p for p in range(1, 8)] for row in c0]
    c2 = [[row[p] * p * (p - 1) for p in range(2, 8)] for row in c0]

    def to_ld(rows):
        return np.array([[LD(int(c.numerator)) / LD(int(c.denominator))
                          for c in row] for row in rows], dtype=LD)

    return to_ld(c0), to_ld(c1), to_ld(c2)


_LAG0, _LAG1, _LAG2 = _lagrange_coefficients()

#: Queries within this many grid spacings of a node use the nodal stencils.
_NODE_TOL = 1e-12


class ProfileSampler:
    """Evaluate a gridded field and its first two x-derivatives anywhere.

    Off-grid points use a degree-7 local Lagrange polynomial on the 8
    surrounding nodes (parity ghosts make the window valid through the
    ends).  On-grid points use the 9-point centered stencils instead, which
    keeps exact odd/even symmetry of nodal data.  Accuracy is O(dx^8) for
    values, O(dx^7) and O(dx^6) for the derivatives.
    """

    def __init__(self, values, dx, parity):
        values = np.asarray(values)
        self.n = values.shape[0]
        self.dx = values.dtype.type(dx)
        self.parity = parity
        self.ext = extend(values, parity, GHOST)
        self._d1 = None
        self._d2 = None

    def _nodal_tables(self):
        if self._d1 is None:
            self._d1 = diff1(self.ext, self.n, self.dx)
            self._d2 = diff2(self.ext, self.n, self.dx)
        return self._d1, self._d2

    def __call__(self, x):
        """Return (f, f_x, f_xx) at the query points x (any shape)."""
        x = np.asarray(x)
        scalar = (x.ndim == 0)
        xq = np.atleast_1d(x).astype(self.ext.dtype)
        t = xq / self.dx
        upper = self.ext.dtype.type(self.n - 1)
        if np.any(t < -_NODE_TOL) or np.any(t > upper * (1.0 + 1e-15) + _NODE_TOL):
            raise ValueError("sampler query outside the grid domain")
        t = np.clip(t, 0.0, upper)

        tr = np.rint(t)
        on_node = np.abs(t - tr) < _NODE_TOL

        f = np.empty_like(t)
        fx = np.empty_like(t)
        fxx = np.empty_like(t)

        off = ~on_node
        if np.any(off):
            toff = t[off]
            j0 = np.floor(toff).astype(np.int64) - 3
            v = toff - j0.astype(t.dtype) - t.dtype.type(3.5)
            powers = np.empty((8, v.shape[0]), dtype=t.dtype)
            powers[0] = 1.0
            for p in range(1, 8):
                powers[p] = powers[p - 1] * v
            w0 = _LAG0.astype(t.dtype) @ powers
            w1 = _LAG1.astype(t.dtype) @ powers[:7]
            w2 = _LAG2.astype(t.dtype) @ powers[:6]
            idx = j0[:, None] + np.arange(8)[None, :] + GHOST
            win = self.ext[idx]
            f[off] = np.einsum("pm,mp->m", w0, win)
            fx[off] = np.einsum("pm,mp->m", w1, win) / self.dx
            fxx[off] = np.einsum("pm,mp->m", w2, win) / (self.dx * self.dx)

        if np.any(on_node):
            d1, d2 = self._nodal_tables()
            i = tr[on_node].astype(np.int64)
            f[on_node] = self.ext[i + GHOST]
            fx[on_node] = d1[i]
            fxx[on_node] = d2[i]

        if scalar:
            return f[0], fx[0], fxx[0]
        out_shape = x.shape
        return (f.reshape(out_shape), fx.reshape(out_shape),
                fxx.reshape(out_shape))
