"""Electromagnetic potentials, paths, and the classical action.

A potential is the pair (V, A) together with the particle constants
(mass, charge, hbar).  The physical fields derive from it as

    E = -dA/dt - grad V,        B_jk = d_j A_k - d_k A_j,

the Lagrangian is  L = m|v|^2/2 + q v.A - q V,  and the action along a
path is the time integral of L.  Paths are piecewise-straight polylines
through (time, vertex) pairs; a two-vertex polyline is the straight
segment q(theta) = y + (theta-s)/(t-s) (x-y).

Gauge transformations V -> V - d(psi)/dt, A -> A + grad(psi) leave (E, B)
untouched and change the action along a fixed path by the boundary
difference psi(t, q(t)) - psi(s, q(s)).

Potentials are closed-form callables picked from a small registry
(uniform field, harmonic, symmetric-gauge magnetic, idealized solenoid)
so that grid evaluation carries no interpolation error.  Callables are
vectorized over trailing axes: V(t, X) with X of shape (d, ...) returns
shape (...), A(t, X) returns (d, ...).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .grid import Grid, spectral_derivative

__all__ = [
    "Potential",
    "PathPolyline",
    "GaugeFunction",
    "PotentialError",
    "fields_from_potential",
    "lagrangian",
    "straight_path",
    "action_along",
    "gauge_transform",
    "numeric_gauge",
    "make_potential",
    "POTENTIAL_REGISTRY",
]


class PotentialError(ValueError):
    pass


@dataclass
class Potential:
    """Electromagnetic data (V, A) plus particle constants.

    ``v`` and ``a`` are callables (t, X) -> field values, or None for zero.
    """

    v: object = None
    a: object = None
    mass: float = 1.0
    charge: float = 1.0
    hbar: float = 1.0
    time_dependent: bool = False
    name: str = ""

    def v_at(self, t, X):
        if self.v is None:
            return np.zeros(np.shape(X)[1:])
        return np.asarray(self.v(t, X), dtype=float)

    def a_at(self, t, X):
        if self.a is None:
            return np.zeros(np.shape(X))
        return np.asarray(self.a(t, X), dtype=float)

    @property
    def has_vector_potential(self) -> bool:
        return self.a is not None


@dataclass
class PathPolyline:
    """Piecewise-straight path through vertices x_j at strictly increasing times."""

    times: np.ndarray
    vertices: np.ndarray  # shape (n_vertices, d)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.vertices = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if self.vertices.shape[0] != self.times.shape[0]:
            raise PotentialError("times and vertices must have equal length")
        if np.any(np.diff(self.times) <= 0):
            raise PotentialError("path times must be strictly increasing")

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def eval(self, theta):
        """Linear interpolation within the containing segment; shape (d, ...) output."""
        theta = np.asarray(theta, dtype=float)
        out = np.stack(
            [np.interp(theta, self.times, self.vertices[:, i]) for i in range(self.dim)]
        )
        return out

    def velocity(self, theta):
        """Piecewise-constant velocity; segment boundaries take the left segment."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        seg = np.clip(np.searchsorted(self.times, theta, side="right") - 1, 0,
                      len(self.times) - 2)
        dv = np.diff(self.vertices, axis=0)  # (nseg, d)
        dt = np.diff(self.times)
        return (dv[seg] / dt[seg, None]).T

    def segments(self):
        for j in range(len(self.times) - 1):
            yield (
                float(self.times[j]),
                float(self.times[j + 1]),
                self.vertices[j],
                self.vertices[j + 1],
            )


@dataclass
class GaugeFunction:
    """Scalar gauge function psi(t, x) with its time and space derivatives."""

    psi: object
    dpsi_dt: object
    grad_psi: object
    time_dependent: bool = True

    def check_consistency(self, t, X, rtol=1e-6, t_step=1e-6, x_step=1e-5):
        """Spot-check the supplied derivatives against central differences."""
        X = np.asarray(X, dtype=float)
        dt_num = (self.psi(t + t_step, X) - self.psi(t - t_step, X)) / (2 * t_step)
        ok = np.allclose(dt_num, self.dpsi_dt(t, X), rtol=rtol, atol=1e-9)
        g = self.grad_psi(t, X)
        for i in range(X.shape[0]):
            Xp = X.copy()
            Xm = X.copy()
            Xp[i] += x_step
            Xm[i] -= x_step
            gi = (self.psi(t, Xp) - self.psi(t, Xm)) / (2 * x_step)
            ok = ok and np.allclose(gi, g[i], rtol=rtol, atol=1e-8)
        return ok


def numeric_gauge(psi, time_dependent=True, t_step=1e-6, x_step=1e-6) -> GaugeFunction:
    """Wrap a bare psi(t, X) with finite-difference derivatives."""

    def dpsi_dt(t, X):
        return (psi(t + t_step, X) - psi(t - t_step, X)) / (2 * t_step)

    def grad_psi(t, X):
        X = np.asarray(X, dtype=float)
        out = np.empty_like(X)
        for i in range(X.shape[0]):
            Xp = X.copy()
            Xm = X.copy()
            Xp[i] += x_step
            Xm[i] -= x_step
            out[i] = (psi(t, Xp) - psi(t, Xm)) / (2 * x_step)
        return out

    return GaugeFunction(psi, dpsi_dt, grad_psi, time_dependent=time_dependent)


def fields_from_potential(p: Potential, grid: Grid, t: float, t_step: float = 1e-6):
    """Electric field and magnetic tensor components on the grid at time t.

    Spatial derivatives are spectral; dA/dt uses a centered difference with
    step ``t_step``.  Returns (E, B) with E of shape (d, *points) and B of
    shape (d(d-1)/2, *points) holding B_jk for j < k.
    """
    X = grid.mesh()
    V = p.v_at(t, X)
    gradV = np.stack(
        [
            spectral_derivative(V[None], grid, _unit_alpha(grid.dim, i))[0].real
            for i in range(grid.dim)
        ]
    )
    if p.has_vector_potential:
        dAdt = (p.a_at(t + t_step, X) - p.a_at(t - t_step, X)) / (2 * t_step)
    else:
        dAdt = np.zeros((grid.dim,) + grid.shape)
    E = -dAdt - gradV
    n_b = grid.dim * (grid.dim - 1) // 2
    B = np.zeros((n_b,) + grid.shape)
    if p.has_vector_potential and grid.dim == 2:
        A = p.a_at(t, X)
        dA2_d1 = spectral_derivative(A[1][None], grid, (1, 0))[0].real
        dA1_d2 = spectral_derivative(A[0][None], grid, (0, 1))[0].real
        B[0] = dA2_d1 - dA1_d2
    return E, B


def _unit_alpha(dim, axis):
    alpha = [0] * dim
    alpha[axis] = 1
    return tuple(alpha)


def lagrangian(p: Potential, t, x, v):
    """m|v|^2/2 + q v.A(t,x) - q V(t,x), vectorized over trailing axes of x, v."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    kinetic = 0.5 * p.mass * np.sum(v * v, axis=0)
    out = kinetic - p.charge * p.v_at(t, x)
    if p.has_vector_potential:
        out = out + p.charge * np.sum(v * p.a_at(t, x), axis=0)
    return out if out.ndim else float(out)


def straight_path(t: float, s: float, x, y) -> PathPolyline:
    """Two-vertex polyline with q(s) = y and q(t) = x."""
    if not (s < t):
        raise PotentialError(f"straight path needs s < t, got s={s}, t={t}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return PathPolyline(times=np.array([s, t]), vertices=np.stack([y, x]))


def action_along(p: Potential, path: PathPolyline, quad_points_per_segment: int = 8):
    """Classical action along a polyline by Gauss-Legendre quadrature per segment.

    Exact when the integrand is polynomial of degree <= 2 * quad - 1 in theta
    along each segment.
    """
    if quad_points_per_segment < 2:
        raise PotentialError("need at least 2 quadrature points per segment")
    nodes, weights = np.polynomial.legendre.leggauss(quad_points_per_segment)
    total = 0.0
    for (ta, tb, xa, xb) in path.segments():
        h = tb - ta
        thetas = 0.5 * (ta + tb) + 0.5 * h * nodes
        vel = (xb - xa) / h  # constant on the segment
        vals = np.array(
            [lagrangian(p, th, xa + (th - ta) * vel, vel) for th in thetas]
        )
        total += 0.5 * h * float(np.dot(weights, vals))
    return total


def gauge_transform(p: Potential, g: GaugeFunction) -> Potential:
    """Return the potential with V' = V - dpsi/dt and A' = A + grad psi."""

    def v_new(t, X, _p=p, _g=g):
        return _p.v_at(t, X) - _g.dpsi_dt(t, X)

    def a_new(t, X, _p=p, _g=g):
        return _p.a_at(t, X) + _g.grad_psi(t, X)

    return replace(
        p,
        v=v_new,
        a=a_new,
        time_dependent=p.time_dependent or g.time_dependent,
        name=(p.name + "+gauge") if p.name else "gauge",
    )


# --- registry of closed-form potential families ---

def _free(mass, charge, hbar, **_):
    return Potential(mass=mass, charge=charge, hbar=hbar, name="free")


def _uniform_field(mass, charge, hbar, e_field=(1.0,), **_):
    e0 = np.atleast_1d(np.asarray(e_field, dtype=float))

    def v(t, X):
        return -np.tensordot(e0, np.asarray(X), axes=(0, 0))

    return Potential(v=v, mass=mass, charge=charge, hbar=hbar, name="uniform_field")


def _harmonic(mass, charge, hbar, omega=1.0, center=0.0, **_):
    """V = m w^2 |x - c|^2 / 2; use charge = 1 so qV is the trap energy."""

    def v(t, X, m=mass, w=omega, c=center):
        X = np.asarray(X)
        c_arr = np.broadcast_to(np.atleast_1d(np.asarray(c, float)), (X.shape[0],))
        r2 = np.zeros(X.shape[1:])
        for i in range(X.shape[0]):
            r2 = r2 + (X[i] - c_arr[i]) ** 2
        return 0.5 * m * w**2 * r2

    return Potential(v=v, mass=mass, charge=charge, hbar=hbar, name="harmonic")


def _symmetric_gauge(mass, charge, hbar, b_field=1.0, **_):
    def a(t, X, b=b_field):
        X = np.asarray(X)
        if X.shape[0] != 2:
            raise PotentialError("symmetric gauge requires d = 2")
        return np.stack([-0.5 * b * X[1], 0.5 * b * X[0]])

    return Potential(a=a, mass=mass, charge=charge, hbar=hbar, name="symmetric_gauge")


def _solenoid(mass, charge, hbar, flux=np.pi, core_radius=0.5, center=(0.0, 0.0), **_):
    """Idealized flux line: A = (flux/2pi)(-y, x)/r^2 outside the core.

    Inside ``core_radius`` the azimuthal component ramps linearly to zero, so
    the magnetic field is a uniform patch confined to the core disc and the
    total flux equals ``flux``.
    """
    cx, cy = center

    def a(t, X, al=flux, r0=core_radius):
        X = np.asarray(X)
        if X.shape[0] != 2:
            raise PotentialError("solenoid requires d = 2")
        x = X[0] - cx
        y = X[1] - cy
        r2 = x * x + y * y
        scale = np.where(r2 >= r0**2, 1.0 / np.maximum(r2, 1e-300), 1.0 / r0**2)
        pref = al / (2.0 * np.pi)
        return np.stack([-pref * y * scale, pref * x * scale])

    return Potential(a=a, mass=mass, charge=charge, hbar=hbar, name="solenoid")


POTENTIAL_REGISTRY = {
    "free": _free,
    "uniform_field": _uniform_field,
    "harmonic": _harmonic,
    "symmetric_gauge": _symmetric_gauge,
    "solenoid": _solenoid,
}


def make_potential(key: str, mass=1.0, charge=1.0, hbar=1.0, **params) -> Potential:
    if key not in POTENTIAL_REGISTRY:
        raise PotentialError(
            f"unknown potential family '{key}'; choices: {sorted(POTENTIAL_REGISTRY)}"
        )
    return POTENTIAL_REGISTRY[key](mass, charge, hbar, **params)
