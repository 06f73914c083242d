"""Closed-form profile families shared by several test modules.

All derivatives here are taken by hand so these helpers are independent of
the package's differentiation machinery and can serve as oracles for it.
"""

import numpy as np

PI = np.pi

MODES = [(1, 0.6), (2, -0.3), (3, 0.1)]


def analytic_profile(x, amplitude, modes):
    """phi, phi_x, phi_xx for phi = sin(pi x)(1 + a sin^2(pi x) q(x))."""
    x = np.asarray(x, dtype=np.longdouble)
    S = np.sin(PI * x)
    C = np.cos(PI * x)
    q = np.zeros_like(x)
    q1 = np.zeros_like(x)
    q2 = np.zeros_like(x)
    for k, c in modes:
        q += c * np.cos(k * PI * x)
        q1 += -c * k * PI * np.sin(k * PI * x)
        q2 += -c * (k * PI) ** 2 * np.cos(k * PI * x)
    a = np.longdouble(amplitude)
    phi = S + a * S ** 3 * q
    phi_x = PI * C + a * (3 * PI * C * S ** 2 * q + S ** 3 * q1)
    phi_xx = (-PI ** 2 * S
              + a * (-3 * PI ** 2 * S ** 3 * q + 6 * PI ** 2 * S * C ** 2 * q
                     + 6 * PI * C * S ** 2 * q1 + S ** 3 * q2))
    return phi, phi_x, phi_xx


def analytic_curvature(x, amplitude, modes):
    """Exact K_rad, K_orb of the family above with b = pi (away from poles)."""
    phi, phi_x, phi_xx = analytic_profile(x, amplitude, modes)
    k_rad = -phi_xx / (PI ** 2 * phi)
    phi_s = phi_x / PI
    k_orb = (1.0 - phi_s ** 2) / phi ** 2
    return k_rad, k_orb


def analytic_curvature_s_derivs(x, amplitude, modes, h=1e-6):
    """dK_rad/ds and dK_orb/ds by Richardson-extrapolated differences of
    the exact curvature (b = pi, so d/ds = (1/b) d/dx)."""
    x = np.asarray(x, dtype=np.longdouble)

    def both(z):
        return np.stack(analytic_curvature(z, amplitude, modes))

    d_h = (both(x + h) - both(x - h)) / (2 * h)
    d_2h = (both(x + 2 * h) - both(x - 2 * h)) / (4 * h)
    dx = (4 * d_h - d_2h) / 3
    ds = dx / PI
    return np.asarray(ds[0], float), np.asarray(ds[1], float)


def make_callables(amplitude, modes):
    """(b_fn, phi_fn) closures over the analytic family, for the oracle."""
    def b_fn(x):
        return np.longdouble(PI)

    def phi_fn(x):
        phi, _, _ = analytic_profile(x, amplitude, modes)
        return phi

    return b_fn, phi_fn
