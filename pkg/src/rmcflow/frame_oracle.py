"""Brute-force curvature oracle for n = 2 warped metrics.

Everything else in this package computes curvature through closed-form
expressions specialized to the warped structure.  This module does the
opposite: it treats g = diag(b^2, phi^2, phi^2 sin^2 alpha) as an opaque
coordinate metric on (x, alpha, beta) and grinds out Christoffel symbols,
the Riemann tensor, and its covariant gradient by nested centered finite
differences in extended precision.  It is slow and proud of it; its only
job is to certify the closed forms in tests.

The three nesting levels use increasing step sizes so that noise from the
inner level stays below the truncation of the outer one.  Evaluation
points must keep a margin of 4*(h_metric + h_riemann + h_grad) from the
poles and the axis, where the coordinate system degenerates.
"""

from __future__ import annotations

import numpy as np

from .stencils import D1_9, LD

__all__ = ["FrameOracle"]


def _fd1(fn, center, axis, h):
    """9-point first derivative of a tensor-valued callable along one
    coordinate axis, accumulated in antisymmetric pairs."""
    out = None
    for k in range(1, 5):
        shift = [center[0], center[1]]
        shift[axis] = center[axis] + k * h
        plus = fn(*shift)
        shift[axis] = center[axis] - k * h
        minus = fn(*shift)
        term = D1_9[4 + k] * (plus - minus)
        out = term if out is None else out + term
    return out / h


class FrameOracle:
    """Finite-difference curvature of diag(b^2, phi^2, phi^2 sin^2 a)."""

    def __init__(self, b_fn, phi_fn, n=2, h_metric=2e-3, h_riemann=5e-3,
                 h_grad=1.5e-2):
        if n != 2:
            raise ValueError("the frame oracle only handles n = 2 fibers")
        self.b_fn = b_fn
        self.phi_fn = phi_fn
        self.h_metric = LD(h_metric)
        self.h_riemann = LD(h_riemann)
        self.h_grad = LD(h_grad)

    def margin(self):
        return 4.0 * float(self.h_metric + self.h_riemann + self.h_grad)

    # ---------------------------------------------------------- base layers

    def metric_diag(self, x, alpha):
        b = LD(self.b_fn(LD(x)))
        phi = LD(self.phi_fn(LD(x)))
        sa = np.sin(LD(alpha))
        return np.array([b * b, phi * phi, phi * phi * sa * sa], dtype=LD)

    def christoffel(self, x, alpha):
        """Gamma[k, i, j] with Gamma^k_{ij}; beta-derivatives vanish."""
        g = self.metric_diag(x, alpha)
        dg = np.zeros((3, 3), dtype=LD)  # dg[mu, i] = d_mu g_ii
        for axis in (0, 1):
            dg[axis] = _fd1(self.metric_diag, (LD(x), LD(alpha)), axis,
                            self.h_metric)
        gamma = np.zeros((3, 3, 3), dtype=LD)
        for k in range(3):
            for i in range(3):
                for j in range(3):
                    # diagonal metric: only l = k contributes, and dg[2]
                    # stays zero because nothing depends on beta
                    term = LD(0)
                    if j == k:
                        term += dg[i, k]
                    if i == k:
                        term += dg[j, k]
                    if i == j:
                        term -= dg[k, i]
                    gamma[k, i, j] = term / (2 * g[k])
        return gamma

    def riemann_lower(self, x, alpha):
        """R_{ijkl} = <R(e_i, e_j) e_k, e_l> in coordinate components."""
        center = (LD(x), LD(alpha))
        gamma = self.christoffel(*center)
        dgamma = np.zeros((3, 3, 3, 3), dtype=LD)  # dgamma[m, k, i, j]
        for axis in (0, 1):
            dgamma[axis] = _fd1(self.christoffel, center, axis,
                                self.h_riemann)
        g = self.metric_diag(*center)
        upper = np.zeros((3, 3, 3, 3), dtype=LD)  # R^l_{ijk}
        for l in range(3):
            for i in range(3):
                for j in range(3):
                    for k in range(3):
                        val = dgamma[i, l, j, k] - dgamma[j, l, i, k]
                        for p in range(3):
                            val += (gamma[l, i, p] * gamma[p, j, k]
                                    - gamma[l, j, p] * gamma[p, i, k])
                        upper[l, i, j, k] = val
        lower = np.zeros((3, 3, 3, 3), dtype=LD)
        for i in range(3):
            for j in range(3):
                for k in range(3):
                    for l in range(3):
                        lower[i, j, k, l] = g[l] * upper[l, i, j, k]
        return lower

    def grad_riemann_lower(self, x, alpha):
        """nabla_m R_{ijkl} in coordinate components."""
        center = (LD(x), LD(alpha))
        dR = np.zeros((3, 3, 3, 3, 3), dtype=LD)
        for axis in (0, 1):
            dR[axis] = _fd1(self.riemann_lower, center, axis, self.h_grad)
        gamma = self.christoffel(*center)
        R = self.riemann_lower(*center)
        grad = np.empty((3, 3, 3, 3, 3), dtype=LD)
        for m in range(3):
            corr = (np.einsum("pi,pjkl->ijkl", gamma[:, m, :], R)
                    + np.einsum("pj,ipkl->ijkl", gamma[:, m, :], R)
                    + np.einsum("pk,ijpl->ijkl", gamma[:, m, :], R)
                    + np.einsum("pl,ijkp->ijkl", gamma[:, m, :], R))
            grad[m] = dR[m] - corr
        return grad

    # ------------------------------------------------------ frame summaries

    def scale_factors(self, x, alpha):
        return np.sqrt(self.metric_diag(x, alpha))

    def riemann_orthonormal(self, x, alpha):
        sf = self.scale_factors(x, alpha)
        R = self.riemann_lower(x, alpha)
        return R / (sf[:, None, None, None] * sf[None, :, None, None]
                    * sf[None, None, :, None] * sf[None, None, None, :])

    def grad_riemann_orthonormal(self, x, alpha):
        sf = self.scale_factors(x, alpha)
        G = self.grad_riemann_lower(x, alpha)
        scale = (sf[:, None, None, None, None]
                 * sf[None, :, None, None, None]
                 * sf[None, None, :, None, None]
                 * sf[None, None, None, :, None]
                 * sf[None, None, None, None, :])
        return G / scale

    def summary(self, x, alpha):
        """Scalar curvature data at one point, as floats."""
        Rhat = self.riemann_orthonormal(x, alpha)
        k_rad_a = Rhat[0, 1, 1, 0]
        k_rad_b = Rhat[0, 2, 2, 0]
        k_orb = Rhat[1, 2, 2, 1]
        ric = np.einsum("ijki->jk", Rhat)
        scal = np.trace(ric)
        rm2 = np.sum(Rhat * Rhat)
        Ghat = self.grad_riemann_orthonormal(x, alpha)
        grad_rm2 = np.sum(Ghat * Ghat)
        return {
            "k_rad": float(k_rad_a),
            "k_rad_beta": float(k_rad_b),
            "k_orb": float(k_orb),
            "ric_diag": [float(ric[i, i]) for i in range(3)],
            "scal": float(scal),
            "rm2": float(rm2),
            "ric2": float(np.sum(ric * ric)),
            "grad_rm2": float(grad_rm2),
        }
