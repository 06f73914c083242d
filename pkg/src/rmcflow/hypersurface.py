"""Equivariant hypersurfaces as profile curves in the warped quotient.

A rotationally symmetric hypersurface in the warped sphere is determined
by a curve u -> (x(u), alpha(u)) in the quotient strip [0,1] x [0,pi]
carrying the metric b^2 dx^2 + phi^2 dalpha^2; the hypersurface is the
orbit of the curve, with orbit radius rho = phi(x) sin(alpha).  Closed
hypersurfaces of sphere type run from the axis alpha = 0 to alpha = pi
and meet it orthogonally.

Principal curvatures split into the profile direction (multiplicity 1)
and the orbit directions (multiplicity n-1):

    kappa_prof = -<nu, D_gamma' gamma'> / |gamma'|^2
    kappa_orb  = d(log rho) along nu

with the unit normal nu = (t2, -t1) in the orthonormal quotient frame.
The orientation makes coordinate spheres near a pole have H > 0, so mean
curvature flow dX/dt = -H nu shrinks them, and the flow itself is
invariant under flipping nu (H flips too).

Everything here is float64: curve positions are physical data, not the
extended-precision fixed-point bookkeeping the ambient flow needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

from .errors import DegenerateCurve, StepRejected
from .stencils import GHOST, diff1, diff2, extend
from .warped import AmbientSampler

__all__ = [
    "PinchingParams", "ProfileCurve", "ShapeReport",
    "build_coordinate_sphere", "build_geodesic_sphere", "build_graph",
    "load_curve", "mcf_cfl_limit", "mcf_step", "mcf_step_auto", "resample",
    "save_curve", "shape",
]

CURVE_VERSION = 1
TOPOLOGIES = ("sphere", "coordinate-sphere")
PI = float(np.pi)


@dataclass
class PinchingParams:
    """Constants of the hypersurface pinching functionals.

    alpha_n follows the dimension table (11/16 for n = 2, else 4/(4n-3));
    a = alpha_n - 1/n enters the weight W = a H^2 + 1.  eps1 is the
    working surrogate for the combined smallness constant; it must not
    exceed 1/(2^7 n).
    """

    n: int = 2
    sigma: float = 0.1
    eps0: float = 1.0 / 12.0
    eps1: float | None = None

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if not 0.0 < self.sigma < 1.0:
            raise ValueError("sigma must lie in (0, 1)")
        if self.eps1 is None:
            self.eps1 = 1.0 / (2.0 ** 7 * self.n)
        if self.eps1 > 1.0 / (2.0 ** 7 * self.n) + 1e-15:
            raise ValueError("eps1 exceeds 1/(2^7 n)")

    @property
    def alpha_n(self):
        if self.n == 2:
            return 11.0 / 16.0
        return 4.0 / (4.0 * self.n - 3.0)

    @property
    def a(self):
        return self.alpha_n - 1.0 / self.n


@dataclass
class ProfileCurve:
    """Discretized profile curve with uniform parameter u in [0,1]."""

    x: np.ndarray
    alpha: np.ndarray
    topology: str = "sphere"

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.alpha = np.asarray(self.alpha, dtype=float)
        if self.x.shape != self.alpha.shape or self.x.ndim != 1:
            raise ValueError("x and alpha must be 1-d arrays of equal length")
        if self.num_nodes < 16:
            raise DegenerateCurve("a profile curve needs at least 16 nodes")
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"unknown topology {self.topology!r}")
        if not (np.all(np.isfinite(self.x))
                and np.all(np.isfinite(self.alpha))):
            raise DegenerateCurve("non-finite curve data")
        if self.alpha[0] != 0.0 or self.alpha[-1] != PI:
            raise DegenerateCurve(
                "endpoints must sit exactly on the axis (alpha = 0 and pi)")
        inner = self.alpha[1:-1]
        if np.any(inner <= 0.0) or np.any(inner >= PI):
            raise DegenerateCurve("interior alpha left (0, pi)")
        if np.any(self.x <= 0.0) or np.any(self.x >= 1.0):
            raise DegenerateCurve("curve touched an ambient pole (x outside"
                                  " (0,1))")

    @property
    def num_nodes(self):
        return self.x.shape[0]

    @property
    def du(self):
        return 1.0 / (self.num_nodes - 1)

    @property
    def u(self):
        return np.linspace(0.0, 1.0, self.num_nodes)

    def copy(self):
        return ProfileCurve(self.x.copy(), self.alpha.copy(), self.topology)


@dataclass
class ShapeReport:
    """Per-node extrinsic geometry of a profile curve, plus extrema.

    Arrays are indexed by curve node.  The ambient samples used to build
    the report (tangent components and curvature eigenvalues at the
    nodes) are kept because the evolution-identity checks reuse them.
    """

    n: int
    kappa_prof: np.ndarray
    kappa_orb: np.ndarray
    h: np.ndarray
    a2: np.ndarray
    traceless: np.ndarray
    grad_h2: np.ndarray
    grad_a2: np.ndarray
    p_pinch: np.ndarray
    w_pinch: np.ndarray
    f_sigma: np.ndarray
    min_sectional: np.ndarray
    speed: np.ndarray          # |gamma'| in the quotient metric
    rho: np.ndarray            # orbit radius
    t1: np.ndarray             # radial tangent component (frame)
    t2: np.ndarray
    k_rad_amb: np.ndarray      # ambient curvature eigenvalues at nodes
    k_orb_amb: np.ndarray

    @property
    def hmax(self):
        return float(np.max(self.h))

    @property
    def hmin(self):
        return float(np.min(self.h))

    @property
    def max_p(self):
        return float(np.max(self.p_pinch))

    @property
    def max_f_sigma(self):
        return float(np.max(self.f_sigma))

    @property
    def max_a2(self):
        return float(np.max(self.a2))

    @property
    def max_traceless(self):
        return float(np.max(self.traceless))

    @property
    def max_grad_h2(self):
        return float(np.max(self.grad_h2))

    @property
    def min_sectional_value(self):
        return float(np.min(self.min_sectional))


def _as_sampler(ambient):
    if isinstance(ambient, AmbientSampler):
        return ambient
    return AmbientSampler(ambient)


def _extrapolate_to_end(values, u, end_index):
    """Quadratic-in-(u - u_end)^2 extrapolation from the three nodes next
    to an axis endpoint.  Curvature fields of a smooth rotationally
    symmetric hypersurface are even functions of signed distance from the
    axis, so the extrapolation variable is the squared offset."""
    if end_index == 0:
        nodes = (1, 2, 3)
    else:
        last = len(values) - 1
        nodes = (last - 1, last - 2, last - 3)
    xi = (u[list(nodes)] - u[end_index]) ** 2
    v = values[list(nodes)]
    l0 = (xi[1] * xi[2]) / ((xi[0] - xi[1]) * (xi[0] - xi[2]))
    l1 = (xi[0] * xi[2]) / ((xi[1] - xi[0]) * (xi[1] - xi[2]))
    l2 = (xi[0] * xi[1]) / ((xi[2] - xi[0]) * (xi[2] - xi[1]))
    return l0 * v[0] + l1 * v[1] + l2 * v[2]


def _curve_frame(curve, samp):
    """Tangent/normal frame and ambient samples along the curve.

    Returns a dict of per-node arrays; raises DegenerateCurve when the
    tangent degenerates (self-pinch).
    """
    p1 = curve.num_nodes
    du = curve.du
    ext_x = extend(curve.x, "even", GHOST)
    ext_a = extend(curve.alpha, "odd", GHOST)
    x_u = diff1(ext_x, p1, du)
    x_uu = diff2(ext_x, p1, du)
    a_u = diff1(ext_a, p1, du)
    a_uu = diff2(ext_a, p1, du)

    b, b_x, phi, phi_x, phi_xx = samp.metric_fields(curve.x)
    speed2 = (b * x_u) ** 2 + (phi * a_u) ** 2
    if np.any(speed2 < 1e-24):
        raise DegenerateCurve("tangent norm fell below 1e-12 (self-pinch)")
    speed = np.sqrt(speed2)
    t1 = b * x_u / speed
    t2 = phi * a_u / speed
    return {
        "x_u": x_u, "x_uu": x_uu, "a_u": a_u, "a_uu": a_uu,
        "b": b, "b_x": b_x, "phi": phi, "phi_x": phi_x, "phi_xx": phi_xx,
        "speed": speed, "speed2": speed2, "t1": t1, "t2": t2,
        "nu1": t2, "nu2": -t1,
    }


def _principal_curvatures(curve, fr):
    """kappa_prof and kappa_orb at every node.

    Interior nodes use the covariant acceleration of the quotient metric
    and the normal derivative of log rho.  The two axis nodes are umbilic
    in the smooth limit; both curvatures there are set to the common
    even extrapolation (the mean of the two fields' extrapolations, which
    coincide for smooth data).
    """
    b, b_x = fr["b"], fr["b_x"]
    phi, phi_x = fr["phi"], fr["phi_x"]
    x_u, a_u = fr["x_u"], fr["a_u"]
    nu1, nu2 = fr["nu1"], fr["nu2"]
    speed2 = fr["speed2"]

    acc_x = fr["x_uu"] + (b_x / b) * x_u ** 2 - (phi * phi_x / b ** 2) * a_u ** 2
    acc_a = fr["a_uu"] + 2.0 * (phi_x / phi) * x_u * a_u
    kappa_prof = -(b * nu1 * acc_x + phi * nu2 * acc_a) / speed2

    sin_a = np.sin(curve.alpha)
    cos_a = np.cos(curve.alpha)
    kappa_orb = np.empty_like(kappa_prof)
    kappa_orb[1:-1] = (nu1[1:-1] * phi_x[1:-1] / (b[1:-1] * phi[1:-1])
                       + nu2[1:-1] * cos_a[1:-1] / (phi[1:-1] * sin_a[1:-1]))

    u = curve.u
    for end in (0, len(u) - 1):
        kp = _extrapolate_to_end(kappa_prof, u, end)
        # interior kappa_orb only (endpoint entries are not yet written)
        ko = _extrapolate_to_end(kappa_orb, u, end)
        common = 0.5 * (kp + ko)
        kappa_prof[end] = common
        kappa_orb[end] = common
    return kappa_prof, kappa_orb, sin_a, cos_a


def shape(curve, ambient, params=None, flip_normal=False):
    """Full extrinsic geometry of the curve in the given ambient metric.

    ambient may be an AmbientMetric or a prebuilt AmbientSampler (the
    coupled stepper reuses one sampler per accepted ambient state).
    flip_normal reverses the normal; reported curvatures change sign but
    the flow velocity -H nu does not.
    """
    if params is None:
        params = PinchingParams()
    samp = _as_sampler(ambient)
    n = samp.n
    if params.n != n:
        params = PinchingParams(n=n, sigma=params.sigma, eps0=params.eps0)
    fr = _curve_frame(curve, samp)
    if flip_normal:
        fr["nu1"] = -fr["nu1"]
        fr["nu2"] = -fr["nu2"]
    kappa_prof, kappa_orb, sin_a, cos_a = _principal_curvatures(curve, fr)

    h = kappa_prof + (n - 1) * kappa_orb
    a2 = kappa_prof ** 2 + (n - 1) * kappa_orb ** 2
    diff = kappa_prof - kappa_orb
    traceless = ((n - 1) / n) * diff * diff

    du = curve.du
    p1 = curve.num_nodes
    speed = fr["speed"]
    h_u = diff1(extend(h, "even", GHOST), p1, du)
    grad_h2 = (h_u / speed) ** 2

    kp_u = diff1(extend(kappa_prof, "even", GHOST), p1, du)
    ko_u = diff1(extend(kappa_orb, "even", GHOST), p1, du)
    rho = fr["phi"] * sin_a
    rho_u = fr["phi_x"] * fr["x_u"] * sin_a + fr["phi"] * cos_a * fr["a_u"]
    log_rho_s = np.zeros_like(rho)
    log_rho_s[1:-1] = rho_u[1:-1] / (rho[1:-1] * speed[1:-1])
    # the rotational term (log rho)'^2 (kp - ko)^2 vanishes at the axis:
    # the curvature difference decays like distance^2 while (log rho)'
    # only grows like 1/distance
    grad_a2 = ((kp_u / speed) ** 2 + (n - 1) * (ko_u / speed) ** 2
               + 2 * (n - 1) * (log_rho_s * diff) ** 2)
    grad_a2[0] = grad_a2[-1] = 0.0

    p_pinch = a2 - params.alpha_n * h ** 2 - 1.0
    w_pinch = params.a * h ** 2 + 1.0
    f_sigma = traceless / w_pinch ** (1.0 - params.sigma)

    k_rad, k_orb_amb, _, _ = samp.curvature_fields(curve.x)
    # ambient sectional curvature of the plane spanned by the tangent and
    # an orbit direction: the curvature operator is diagonal, so the plane
    # mixes K_rad with weight t1^2
    t1 = fr["t1"]
    kbar_mixed = k_orb_amb + (k_rad - k_orb_amb) * t1 ** 2
    sect = kbar_mixed + kappa_prof * kappa_orb
    if n >= 3:
        sect = np.minimum(sect, k_orb_amb + kappa_orb ** 2)
    return ShapeReport(
        n=n, kappa_prof=kappa_prof, kappa_orb=kappa_orb, h=h, a2=a2,
        traceless=traceless, grad_h2=grad_h2, grad_a2=grad_a2,
        p_pinch=p_pinch, w_pinch=w_pinch, f_sigma=f_sigma,
        min_sectional=sect, speed=speed, rho=rho,
        t1=t1, t2=fr["t2"], k_rad_amb=k_rad, k_orb_amb=k_orb_amb)


# ----------------------------------------------------------------- stepping

def mcf_cfl_limit(curve, ambient, cfl_factor=0.2):
    """Parabolic step bound from the smallest induced node spacing."""
    samp = _as_sampler(ambient)
    fr = _curve_frame(curve, samp)
    ds_min = float(np.min(fr["speed"])) * curve.du
    return cfl_factor * ds_min * ds_min


def _advance(curve, samp, fr, dt):
    kappa_prof, kappa_orb, _, _ = _principal_curvatures(curve, fr)
    h = kappa_prof + (samp.n - 1) * kappa_orb
    # normal in coordinate components: nu^x = nu1/b, nu^alpha = nu2/phi
    vx = -h * fr["nu1"] / fr["b"]
    va = -h * fr["nu2"] / fr["phi"]
    new_x = curve.x + dt * vx
    new_a = curve.alpha + dt * va
    try:
        return ProfileCurve(new_x, new_a, curve.topology)
    except DegenerateCurve as exc:
        raise StepRejected(f"curve degenerated during step: {exc}") from exc


def mcf_step(curve, ambient, dt, cfl_factor=0.2):
    """Move every node by -H nu dt (explicit step of dX/dt = -H nu).

    The normal velocity is expressed in (x, alpha) components through the
    quotient metric.  Axis endpoints move along the axis only: their
    alpha-velocity vanishes identically because the curve meets the axis
    orthogonally, so alpha = 0 and pi are preserved bitwise.  Rejects the
    step when dt exceeds the parabolic limit or when a node leaves the
    open quotient strip (extinction must be detected by the caller, not
    stepped through).
    """
    samp = _as_sampler(ambient)
    fr = _curve_frame(curve, samp)
    ds_min = float(np.min(fr["speed"])) * curve.du
    limit = cfl_factor * ds_min * ds_min
    if dt > limit * (1.0 + 1e-12):
        raise StepRejected(
            f"dt = {dt:.6e} exceeds the curve parabolic limit {limit:.6e}")
    return _advance(curve, samp, fr, dt)


def mcf_step_auto(curve, ambient, cfl_factor=0.2, dt_cap=None):
    """One step at the current parabolic limit; returns (curve, dt).

    Single-frame variant for run loops: the tangent frame is built once
    and reused for both the step-size bound and the velocity.  dt_cap
    clips the step (to land on a horizon or to match another subsystem's
    limit)."""
    samp = _as_sampler(ambient)
    fr = _curve_frame(curve, samp)
    ds_min = float(np.min(fr["speed"])) * curve.du
    dt = cfl_factor * ds_min * ds_min
    if dt_cap is not None:
        dt = min(dt, dt_cap)
    return _advance(curve, samp, fr, dt), dt


# ---------------------------------------------------------------- resample

def _arclength_stations(curve, samp):
    """Cumulative induced arclength at the nodes (chord rule with midpoint
    metric coefficients)."""
    xm = 0.5 * (curve.x[:-1] + curve.x[1:])
    b, _, phi, _, _ = samp.metric_fields(xm)
    dxs = np.diff(curve.x)
    das = np.diff(curve.alpha)
    seg = np.sqrt((b * dxs) ** 2 + (phi * das) ** 2)
    return np.concatenate([[0.0], np.cumsum(seg)])


def spacing_ratio(curve, ambient):
    """Largest over smallest induced node spacing."""
    samp = _as_sampler(ambient)
    ell = _arclength_stations(curve, samp)
    seg = np.diff(ell)
    return float(np.max(seg) / np.min(seg))


def resample(curve, ambient):
    """Redistribute the nodes to uniform induced arclength.

    The parameter-to-arclength map is inverted monotonically (piecewise
    cubic Hermite, which cannot overshoot), then the curve coordinates
    are re-evaluated with parity-correct cubic splines at the new
    parameter values.  A curve that is already uniform comes back
    unchanged up to interpolation rounding.
    """
    if curve.num_nodes < 16:
        raise DegenerateCurve("resample needs at least 16 nodes")
    samp = _as_sampler(ambient)
    ell = _arclength_stations(curve, samp)
    total = ell[-1]
    if total <= 0.0 or np.any(np.diff(ell) <= 0.0):
        raise DegenerateCurve("induced arclength is not strictly increasing")
    u = curve.u
    u_of_ell = PchipInterpolator(ell, u)
    targets = np.linspace(0.0, total, curve.num_nodes)
    u_new = u_of_ell(targets)
    u_new[0], u_new[-1] = 0.0, 1.0
    u_new = np.clip(u_new, 0.0, 1.0)

    x_spline = CubicSpline(u, curve.x, bc_type=((1, 0.0), (1, 0.0)))
    a_spline = CubicSpline(u, curve.alpha, bc_type=((2, 0.0), (2, 0.0)))
    new_x = x_spline(u_new)
    new_a = a_spline(u_new)
    new_x[0], new_x[-1] = curve.x[0], curve.x[-1]
    new_a[0], new_a[-1] = 0.0, PI
    return ProfileCurve(new_x, new_a, curve.topology)


# ---------------------------------------------------------------- builders

def build_coordinate_sphere(x0, num_nodes, topology="coordinate-sphere"):
    """Constant-x curve covering the full orbit range alpha in [0, pi]."""
    if not 0.0 < x0 < 1.0:
        raise ValueError("coordinate sphere needs x0 in (0, 1)")
    alpha = np.linspace(0.0, PI, num_nodes)
    return ProfileCurve(np.full(num_nodes, float(x0)), alpha, topology)


def build_geodesic_sphere(metric, rho0, num_nodes):
    """Coordinate sphere at geodesic distance rho0 from the x = 0 pole."""
    s = np.asarray(metric.s_coords(), dtype=float)
    if not 0.0 < rho0 < s[-1]:
        raise ValueError("rho0 must lie strictly between the poles")
    x0 = float(np.interp(rho0, s, np.asarray(metric.x, dtype=float)))
    return build_coordinate_sphere(x0, num_nodes)


def build_graph(num_nodes, offset=0.0, modes=()):
    """Graph curve x(alpha) = 1/2 + offset + sum_k c_k cos(k alpha).

    cos(k alpha) has vanishing alpha-derivative at the axis, so the graph
    meets it orthogonally.  modes is a sequence of (k, c_k) pairs; the
    pure offset shifts the equator toward a pole.
    """
    alpha = np.linspace(0.0, PI, num_nodes)
    x = np.full(num_nodes, 0.5 + float(offset))
    for k, c in modes:
        x = x + float(c) * np.cos(int(k) * alpha)
    return ProfileCurve(x, alpha, "sphere")


# --------------------------------------------------------------- curve i/o

def _format_f64(value):
    return np.format_float_positional(np.float64(value), unique=True)


def save_curve(path, curve):
    """Write a curve as text: header "P topology version", then P+1 lines
    "u x alpha" with exact-roundtrip decimal values."""
    p = curve.num_nodes - 1
    lines = [f"{p} {curve.topology} {CURVE_VERSION}"]
    u = curve.u
    for i in range(curve.num_nodes):
        lines.append(f"{_format_f64(u[i])} {_format_f64(curve.x[i])} "
                     f"{_format_f64(curve.alpha[i])}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_curve(path):
    """Read a curve written by save_curve."""
    with open(path) as fh:
        raw = [ln.strip() for ln in fh]
    lines = [ln for ln in raw if ln and not ln.startswith("#")]
    if not lines:
        raise ValueError(f"empty curve file: {path}")
    head = lines[0].split()
    if len(head) != 3:
        raise ValueError(f"malformed curve header: {lines[0]!r}")
    p = int(head[0])
    topology = head[1]
    version = int(head[2])
    if version != CURVE_VERSION:
        raise ValueError(f"unsupported curve version {version}")
    rows = lines[1:]
    if len(rows) != p + 1:
        raise ValueError(f"expected {p + 1} curve rows, found {len(rows)}")
    data = np.array([[float(tok) for tok in row.split()] for row in rows],
                    dtype=float)
    if data.shape[1] != 3:
        raise ValueError("curve rows must be 'u x alpha'")
    return ProfileCurve(data[:, 1], data[:, 2], topology)
