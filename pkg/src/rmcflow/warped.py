"""Rotationally symmetric warped-product metrics on S^{n+1}.

The metric is g = b(x)^2 dx^2 + phi(x)^2 g_{S^n} on [0,1] x S^n, with
phi vanishing at both ends (the poles) and phi_s = phi_x / b equal to +-1
there so the sphere closes up smoothly.  Everything ambient is carried in
extended precision: the flow has to sit on a discrete fixed point to
residuals far below float64 data noise.

Curvature conventions.  With d/ds = (1/b) d/dx,

    K_rad = -phi_ss / phi          sectional curvature of planes containing
                                   the radial direction,
    K_orb = (1 - phi_s^2) / phi^2  sectional curvature of orbit planes.

The orbital curvature is never evaluated from that raw quotient: both
numerator and denominator vanish to second order at the poles and the
quotient loses all accuracy there.  Instead we integrate the exact relation
d(1 - phi_s^2) = K_rad d(phi^2) from each pole and blend, which is exact
whenever K_rad is grid-constant (round spheres) and uniformly second-order
accurate otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PoleSingularity, StepRejected
from .stencils import GHOST, LD, ProfileSampler, diff1, diff2, extend

__all__ = [
    "AmbientMetric", "AmbientCurvature", "AmbientSampler",
    "PinchingReport", "build_round", "build_perturbed", "curvature",
    "curvature_gradients", "volume_and_diameter", "pinching_norm",
    "pinching_check", "sphere_area",
    "save_profile", "load_profile", "trapezoid_weights",
]


def sphere_area(n):
    """Surface measure of the unit n-sphere."""
    return 2.0 * math.pi ** ((n + 1) / 2.0) / math.gamma((n + 1) / 2.0)


def trapezoid_weights(num_nodes, dx, dtype=LD):
    w = np.full(num_nodes, dtype(dx), dtype=dtype)
    w[0] *= dtype(0.5)
    w[-1] *= dtype(0.5)
    return w


@dataclass
class AmbientMetric:
    """Gridded warped-product metric.  x is uniform on [0, 1]."""

    n: int
    b: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=LD)
        self.phi = np.asarray(self.phi, dtype=LD)
        if self.b.shape != self.phi.shape or self.b.ndim != 1:
            raise ValueError("b and phi must be 1-d arrays of equal length")
        if self.n < 2:
            raise ValueError("fiber dimension n must be at least 2")

    @property
    def num_nodes(self):
        return self.phi.shape[0]

    @property
    def dx(self):
        return LD(1) / LD(self.num_nodes - 1)

    @property
    def x(self):
        return np.arange(self.num_nodes, dtype=LD) * self.dx

    def copy(self):
        return AmbientMetric(self.n, self.b.copy(), self.phi.copy())

    def s_coords(self):
        """Arclength s(x) of the meridian, cumulative trapezoid of b dx."""
        cell = 0.5 * (self.b[:-1] + self.b[1:]) * self.dx
        return np.concatenate([np.zeros(1, dtype=LD), np.cumsum(cell)])

    def length(self):
        return self.s_coords()[-1]


@dataclass
class AmbientCurvature:
    """Pointwise curvature of an AmbientMetric plus its global averages."""

    n: int
    k_rad: np.ndarray
    k_orb: np.ndarray
    phi_s: np.ndarray
    phi_ss: np.ndarray
    ric_rad: np.ndarray
    ric_orb: np.ndarray
    scal: np.ndarray
    rbar: np.ndarray        # scalar (0-d longdouble)
    vol: np.ndarray         # scalar
    measure: np.ndarray     # per-node weight * phi^n * b (volume element)

    def rm2(self):
        """|Rm|^2 pointwise."""
        n = self.n
        return 4 * n * self.k_rad ** 2 + 2 * n * (n - 1) * self.k_orb ** 2

    def ric2(self):
        """|Ric|^2 pointwise."""
        return self.ric_rad ** 2 + self.n * self.ric_orb ** 2

    def e2(self, kref):
        """|Rm - Rm_ref|^2 against the constant-curvature tensor with
        sectional curvature kref."""
        n = self.n
        return (4 * n * (self.k_rad - kref) ** 2
                + 2 * n * (n - 1) * (self.k_orb - kref) ** 2)

    def traceless_rm2(self):
        """|Rm|^2 - 2 R^2 / (n(n+1)), written in its manifestly
        nonnegative form (4n(n-1)/(n+1)) (K_rad - K_orb)^2."""
        n = self.n
        diff = self.k_rad - self.k_orb
        return (4 * n * (n - 1) / LD(n + 1)) * diff * diff

    def min_sectional(self):
        return min(np.min(self.k_rad), np.min(self.k_orb))


def _pole_k_rad(phi_ss, phi_x, num_nodes, dx):
    """K_rad at the poles as the ratio of first x-derivatives (l'Hopital).

    phi_ss is odd across each pole, so its odd extension feeds the same
    centered stencil used in the interior; on grid-constant-K data the
    stencil constant cancels and the pole value matches the interior one
    to rounding.
    """
    ext = extend(phi_ss, "odd", GHOST)
    d = diff1(ext, num_nodes, dx)
    return -d[0] / phi_x[0], -d[-1] / phi_x[-1]


def curvature(metric, pole_tol=0.5, slope_tol=0.1):
    """Curvature fields and volume averages of a warped metric.

    Raises StepRejected on non-finite or non-positive interior profile
    data, PoleSingularity when the profile stops closing smoothly at a
    pole.  Two pole defenses run: the slope condition |phi_s| = 1 (within
    slope_tol; violations mean a cone point) and an even extrapolation of
    the orbital curvature to the pole, which must agree with the radial
    value there (within pole_tol, relative; violations mean the curvature
    stopped being resolvably smooth)."""
    n = metric.n
    b, phi = metric.b, metric.phi
    m1 = metric.num_nodes
    dx = metric.dx

    if not (np.all(np.isfinite(b)) and np.all(np.isfinite(phi))):
        raise StepRejected("non-finite metric data")
    if np.any(b <= 0):
        raise StepRejected("b lost positivity")
    if phi[0] != 0 or phi[-1] != 0:
        raise PoleSingularity("profile does not vanish at the poles")
    if np.any(phi[1:-1] <= 0):
        raise StepRejected("phi lost positivity in the interior")

    ext_phi = extend(phi, "odd", GHOST)
    ext_b = extend(b, "even", GHOST)
    phi_x = diff1(ext_phi, m1, dx)
    phi_xx = diff2(ext_phi, m1, dx)
    b_x = diff1(ext_b, m1, dx)

    phi_s = phi_x / b
    phi_ss = phi_xx / (b * b) - phi_x * b_x / (b * b * b)

    # smooth closure requires |phi_s| = 1 at the poles; the flux integral
    # below anchors the orbital curvature on that assumption, so a cone
    # point has to be rejected here rather than silently smoothed over
    for pole, sign in ((0, 1.0), (-1, -1.0)):
        defect = abs(float(sign * phi_s[pole]) - 1.0)
        if defect > slope_tol:
            raise PoleSingularity(
                f"pole slope defect {defect:.3g} exceeds {slope_tol:.3g}: "
                "the metric has a cone point")

    k_rad = np.empty(m1, dtype=LD)
    k_rad[1:-1] = -phi_ss[1:-1] / phi[1:-1]
    k_rad[0], k_rad[-1] = _pole_k_rad(phi_ss, phi_x, m1, dx)

    # orbital curvature by the pole-anchored flux integral
    psi = phi * phi
    kbar = 0.5 * (k_rad[:-1] + k_rad[1:])
    cell = kbar * (psi[1:] - psi[:-1])
    integral = np.concatenate([np.zeros(1, dtype=LD), np.cumsum(cell)])
    k_orb = np.empty(m1, dtype=LD)
    x = metric.x
    weight = np.sin(LD(0.5) * LD(np.pi) * x) ** 2
    left = integral[1:-1] / psi[1:-1]
    right = (integral[1:-1] - integral[-1]) / psi[1:-1]
    k_orb[1:-1] = (1 - weight[1:-1]) * left + weight[1:-1] * right
    k_orb[0] = k_rad[0]
    k_orb[-1] = k_rad[-1]

    # smooth-closure check: even extrapolation of K_orb to the pole must
    # agree with K_rad there
    for pole, nodes in ((0, (1, 2, 3)), (-1, (m1 - 2, m1 - 3, m1 - 4))):
        xi = (x[list(nodes)] - x[pole]) ** 2
        ki = k_orb[list(nodes)]
        # quadratic-in-xi extrapolation to xi = 0
        l0 = (xi[1] * xi[2]) / ((xi[0] - xi[1]) * (xi[0] - xi[2]))
        l1 = (xi[0] * xi[2]) / ((xi[1] - xi[0]) * (xi[1] - xi[2]))
        l2 = (xi[0] * xi[1]) / ((xi[2] - xi[0]) * (xi[2] - xi[1]))
        k0 = l0 * ki[0] + l1 * ki[1] + l2 * ki[2]
        if abs(float(k0 - k_rad[pole])) > pole_tol * (1.0 + abs(float(k_rad[pole]))):
            raise PoleSingularity(
                f"orbital curvature extrapolates to {float(k0):.6g} at pole "
                f"{0 if pole == 0 else 1} but radial curvature is "
                f"{float(k_rad[pole]):.6g}")

    ric_rad = n * k_rad
    ric_orb = k_rad + (n - 1) * k_orb
    scal = 2 * n * k_rad + n * (n - 1) * k_orb

    w = trapezoid_weights(m1, dx)
    measure = w * phi ** n * b
    vol = sphere_area(n) * np.sum(measure)
    rbar = np.sum(measure * scal) / np.sum(measure)

    return AmbientCurvature(
        n=n, k_rad=k_rad, k_orb=k_orb, phi_s=phi_s, phi_ss=phi_ss,
        ric_rad=ric_rad, ric_orb=ric_orb, scal=scal,
        rbar=rbar, vol=vol, measure=measure)


def curvature_gradients(metric, curv):
    """s-derivatives of the curvature eigenvalues and |grad Rm|^2.

    For a warped product the full covariant gradient norm reduces to

        |grad Rm|^2 = 4n (K_rad')^2 + 2n(n-1) (K_orb')^2
                      + 8n(n-1) (phi_s/phi)^2 (K_rad - K_orb)^2

    with ' = d/ds.  The last term is the rotational part: the curvature
    operator is diagonal in the adapted frame, and parallel transport
    around the orbits mixes the eigenvalue difference at rate phi_s/phi.
    At the poles every term vanishes by symmetry.
    """
    m1 = metric.num_nodes
    dx = metric.dx
    n = metric.n
    krad_x = diff1(extend(curv.k_rad, "even", GHOST), m1, dx)
    korb_x = diff1(extend(curv.k_orb, "even", GHOST), m1, dx)
    krad_s = krad_x / metric.b
    korb_s = korb_x / metric.b

    mix = np.zeros(m1, dtype=LD)
    diff = curv.k_rad[1:-1] - curv.k_orb[1:-1]
    mix[1:-1] = curv.phi_s[1:-1] * diff / metric.phi[1:-1]
    grad_rm2 = (4 * n * krad_s ** 2 + 2 * n * (n - 1) * korb_s ** 2
                + 8 * n * (n - 1) * mix ** 2)
    return krad_s, korb_s, grad_rm2


def volume_and_diameter(metric):
    """Riemannian volume and a diameter estimate.

    The diameter of a warped sphere is at least the pole-to-pole meridian
    length L.  An antipodal pair on the widest orbit is at distance at most
    min(pi * phi_max, 2 * min(s*, L - s*)) (half circumference of the orbit
    versus the shortest detour over a pole), so we report the larger of the
    two lower bounds as the estimate.
    """
    n = metric.n
    w = trapezoid_weights(metric.num_nodes, metric.dx)
    vol = sphere_area(n) * float(np.sum(w * metric.phi ** n * metric.b))
    s = metric.s_coords()
    length = float(s[-1])
    i_max = int(np.argmax(metric.phi))
    s_max = float(s[i_max])
    orbit = min(math.pi * float(metric.phi[i_max]),
                2.0 * min(s_max, length - s_max))
    return vol, max(length, orbit)


def pinching_norm(curv, kref=1.0):
    """Pointwise |Rm - Rm_round(kref)| and its maximum over the grid."""
    pointwise = np.sqrt(curv.e2(LD(kref)))
    return pointwise, float(np.max(pointwise))


@dataclass
class PinchingReport:
    """Result of the closeness-to-round entry test."""

    holds: bool
    lhs_curv: float      # sup |Rm - Rm_round(1)|
    lhs_grad: float      # sup |grad Rm|
    eps0: float


def pinching_check(metric, eps0):
    """Test whether a metric is eps0-close to the unit round sphere.

    The condition is sup |Rm - Rm_round(1)| <= eps0 together with
    sup |grad Rm| <= eps0, both in the orthonormal frame of the metric
    itself.  Returns a PinchingReport; never raises on failure, the caller
    decides whether running outside the smallness hypothesis is an error.
    """
    curv = curvature(metric)
    _, lhs_curv = pinching_norm(curv, kref=1.0)
    _, _, grad_rm2 = curvature_gradients(metric, curv)
    lhs_grad = float(np.sqrt(np.max(grad_rm2)))
    holds = lhs_curv <= eps0 and lhs_grad <= eps0
    return PinchingReport(holds=holds, lhs_curv=lhs_curv,
                          lhs_grad=lhs_grad, eps0=float(eps0))


# ----------------------------------------------------------------- builders

def _symmetrize(arr):
    """Average with the mirror image; bitwise symmetric by commutativity."""
    return 0.5 * (arr + arr[::-1])


def _base_profile(x):
    """sin(pi x) adjusted to vanish bitwise at both endpoints.

    The floating-point pi is not an exact zero of sin, so plain samples of
    sin(pi x) end about 1e-16 away from zero at x = 1; pinning that node
    would create a jump that the second-derivative stencil amplifies by
    1/dx^2.  Subtracting the linear ramp sin(pi) * x is a single globally
    smooth correction with the same endpoint defect, so the difference
    vanishes exactly at both ends with no kink anywhere.
    """
    pi_ld = LD(np.pi)
    return _symmetrize(np.sin(pi_ld * x) - np.sin(pi_ld) * x)


def build_round(n, num_intervals, radius=1.0):
    """Round sphere of the given radius: b = pi * radius, phi = radius sin(pi x),
    mirror-symmetric bitwise and with exactly vanishing endpoint profile."""
    m1 = num_intervals + 1
    x = np.arange(m1, dtype=LD) / LD(num_intervals)
    phi = LD(radius) * _base_profile(x)
    b = np.full(m1, LD(np.pi) * LD(radius), dtype=LD)
    return AmbientMetric(n=n, b=b, phi=phi)


def build_perturbed(n, num_intervals, amplitude, modes=None, symmetric=False,
                    seed=None, normalize_volume=True):
    """Round sphere with a smooth even-parity profile perturbation.

        phi = sin(pi x) * (1 + amplitude * sin^2(pi x) * q(x)),
        q(x) = sum_k c_k cos(k pi x),  b = pi.

    The sin^2 envelope keeps the pole slopes phi_s = 1 exact, so the
    perturbed metric still closes smoothly.  With symmetric=True only even
    k are used and the metric stays mirror-symmetric about the equator.
    If modes is None three coefficients are drawn from the seeded rng.
    With normalize_volume the metric is rescaled to the volume of the unit
    round sphere so the average scalar curvature starts near n(n+1).
    """
    if modes is None:
        rng = np.random.default_rng(seed)
        raw = rng.uniform(-1.0, 1.0, size=3)
        ks = (2, 4, 6) if symmetric else (1, 2, 3)
        modes = list(zip(ks, raw / np.sum(np.abs(raw))))
    else:
        modes = list(modes)
        if symmetric and any(k % 2 for k, _ in modes):
            raise ValueError("symmetric perturbation needs even wavenumbers")

    m1 = num_intervals + 1
    x = np.arange(m1, dtype=LD) / LD(num_intervals)
    pi_ld = LD(np.pi)
    base = _base_profile(x)
    q = np.zeros(m1, dtype=LD)
    for k, c in modes:
        q += LD(c) * np.cos(LD(k) * pi_ld * x)
    if symmetric:
        q = _symmetrize(q)
    phi = base * (1 + LD(amplitude) * base ** 2 * q)
    b = np.full(m1, pi_ld, dtype=LD)
    metric = AmbientMetric(n=n, b=b, phi=phi)

    if normalize_volume:
        vol_round, _ = volume_and_diameter(build_round(n, num_intervals))
        vol, _ = volume_and_diameter(metric)
        lam = LD((vol_round / vol) ** (1.0 / (n + 1)))
        metric = AmbientMetric(n=n, b=lam * metric.b, phi=lam * metric.phi)
    return metric


# ------------------------------------------------------------- profile i/o

PROFILE_VERSION = 1


def format_ld(value):
    """Shortest decimal that parses back to the identical longdouble."""
    return np.format_float_positional(LD(value), unique=True)


def save_profile(path, metric):
    """Write an ambient profile as plain text.

    Format: one header line "n M version" (M = interval count), then M+1
    data lines "x b phi".  Values are written with enough digits to parse
    back to the identical extended-precision numbers.
    """
    m = metric.num_nodes - 1
    lines = [f"{metric.n} {m} {PROFILE_VERSION}"]
    x = metric.x
    for i in range(metric.num_nodes):
        lines.append(f"{format_ld(x[i])} {format_ld(metric.b[i])} "
                     f"{format_ld(metric.phi[i])}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_profile(path):
    """Read an ambient profile written by save_profile."""
    with open(path) as fh:
        raw = [ln.strip() for ln in fh]
    lines = [ln for ln in raw if ln and not ln.startswith("#")]
    if not lines:
        raise ValueError(f"empty profile file: {path}")
    head = lines[0].split()
    if len(head) != 3:
        raise ValueError(f"malformed profile header: {lines[0]!r}")
    n, m, version = (int(tok) for tok in head)
    if version != PROFILE_VERSION:
        raise ValueError(f"unsupported profile version {version}")
    rows = lines[1:]
    if len(rows) != m + 1:
        raise ValueError(f"expected {m + 1} profile rows, found {len(rows)}")
    data = np.array([[LD(tok) for tok in row.split()] for row in rows],
                    dtype=LD)
    if data.shape[1] != 3:
        raise ValueError("profile rows must be 'x b phi'")
    if data[0, 0] != 0 or data[-1, 0] != 1:
        raise ValueError("profile x column must run from 0 to 1")
    return AmbientMetric(n=n, b=data[:, 1], phi=data[:, 2])


# ---------------------------------------------------------------- sampling

class AmbientSampler:
    """Evaluate ambient geometry at arbitrary x for the curve solver.

    Bundles degree-7 samplers for b and phi and for the two curvature
    eigenvalues, returning float64 (the curve state is float64; the
    extended-precision ambient grid only matters for the ambient flow's own
    fixed-point residuals).
    """

    def __init__(self, metric, curv=None):
        self.n = metric.n
        self.dx = float(metric.dx)
        if curv is None:
            curv = curvature(metric)
        self.curv = curv
        # float64 tables: every consumer is float64 curve geometry, and
        # float64 window arithmetic is far cheaper than extended precision
        dxf = float(metric.dx)
        self._b = ProfileSampler(np.asarray(metric.b, float), dxf, "even")
        self._phi = ProfileSampler(np.asarray(metric.phi, float), dxf, "odd")
        self._krad = ProfileSampler(np.asarray(curv.k_rad, float), dxf,
                                    "even")
        self._korb = ProfileSampler(np.asarray(curv.k_orb, float), dxf,
                                    "even")

    def metric_fields(self, xq):
        """(b, b_x, phi, phi_x, phi_xx) at query points, float64."""
        xf = np.asarray(xq, dtype=float)
        b, b_x, _ = self._b(xf)
        phi, phi_x, phi_xx = self._phi(xf)
        return b, b_x, phi, phi_x, phi_xx

    def curvature_fields(self, xq):
        """(k_rad, k_orb, dk_rad/ds, dk_orb/ds) at query points, float64."""
        xf = np.asarray(xq, dtype=float)
        b, _, _ = self._b(xf)
        krad, krad_x, _ = self._krad(xf)
        korb, korb_x, _ = self._korb(xf)
        return krad, korb, krad_x / b, korb_x / b
