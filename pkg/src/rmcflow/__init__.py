"""Numerical laboratory for a coupled Ricci / mean-curvature flow on
rotationally symmetric spheres.

The ambient metric is a warped product b(x)^2 dx^2 + phi(x)^2 g_{S^n} on
S^{n+1}, evolved by volume-normalized Ricci flow; an equivariant
hypersurface, reduced to a profile curve in the 2-dimensional quotient,
moves by mean curvature flow in the time-dependent ambient space.  The
package integrates the coupled system, monitors the geometric quantities
that control its behavior, and verifies the evolution identities and
inequalities the monitors are supposed to satisfy.
"""

__version__ = "0.1.0"
