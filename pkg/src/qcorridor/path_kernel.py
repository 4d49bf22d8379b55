"""Desk-scale direct realization of the time-sliced restricted propagator.

Two objects live here.  The *ordered weight factor* F(t, s; q) along a path
q solves

    dU/dtheta = -( i Hs(theta, q(theta)) + W(theta, q(theta)) ) U,   U(s) = I,

computed as a time-ordered product of midpoint exponentials (second-order
accurate).  Its operator norm obeys ||F|| <= exp(-int (w - C)), which is
asserted on every constructed factor.

The *one-step kernel* maps a field through a single Fresnel integral over
straight paths,

    u(x) = sqrt(m / (2 pi i hbar rho))
           * int exp(i S(t,s; q_{x,y}) / hbar) F(t,s; q_{x,y}) f(y) dy,

with the improper oscillatory integral regularized by a Gaussian cutoff
exp(-eps |y - x|^2) and truncated to a stationary-phase window around x of
radius (window) * sqrt(hbar rho / m).  Iterating the step over a
subdivision approximates the restricted propagator; matrix observables can
be inserted between slices (or, behind a flag, at the straight-path
position inside a slice).

The oracle is restricted to one dimension and a handful of slices; it
exists to validate the PDE propagators, not to compete with them.
Quadrature choices: plain Gauss-Legendre on the damped integrand
('damped_gauss'), or a Filon scheme that treats the quadratic phase
exactly through Fresnel moments and interpolates the smooth remainder
linearly ('filon_gauss').
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import fresnel

from .grid import SpinorField
from .potentials import PathPolyline, Potential
from .weights import InvariantViolation, WeightSpec, expm_stack

__all__ = [
    "OrderedFactor",
    "SliceKernelConfig",
    "KernelError",
    "ordered_weight_factor",
    "one_step_kernel_apply",
    "sliced_kernel_apply",
    "insert_observables",
]

MAX_ORACLE_SLICES = 8
MAX_ORACLE_POINTS = 512


class KernelError(ValueError):
    pass


@dataclass
class OrderedFactor:
    """Time-ordered damping/spin factor along a path, with its norm budget."""

    value: np.ndarray        # (l, l)
    path: PathPolyline
    s: float
    t: float
    substeps: int
    bound_exponent: float    # midpoint-rule integral of (w - C) along the path

    def norm(self) -> float:
        return float(np.linalg.norm(self.value, ord=2))

    def bound(self) -> float:
        return float(np.exp(-self.bound_exponent))


def _midpoint_nodes(path: PathPolyline, s: float, t: float, substeps: int):
    """Midpoint times/weights covering [s, t], at least `substeps` per segment."""
    cuts = [s]
    for tau in path.times:
        if s < tau < t:
            cuts.append(float(tau))
    cuts.append(t)
    thetas = []
    widths = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        h = (b - a) / substeps
        for k in range(substeps):
            thetas.append(a + (k + 0.5) * h)
            widths.append(h)
    return np.asarray(thetas), np.asarray(widths)


def ordered_weight_factor(
    path: PathPolyline,
    w: WeightSpec | None,
    hs,
    s: float,
    t: float,
    substeps: int = 8,
) -> OrderedFactor:
    """Solve the ordered-factor equation along a polyline by midpoint exponentials.

    The factor is the product of exp(-h (i Hs + W)) at segment-respecting
    midpoints, applied in time order; halving the step reduces the error by
    about four.  Raises InvariantViolation if the norm bound
    ||F|| <= exp(-int (w - C)) fails beyond 1e-8.
    """
    if not (path.t_start - 1e-12 <= s < t <= path.t_end + 1e-12):
        raise KernelError("factor interval must lie inside the path domain")
    if substeps < 4:
        raise KernelError("need at least 4 substeps per path segment")
    l = w.l if w is not None else (hs.l if hs is not None else 1)
    thetas, widths = _midpoint_nodes(path, s, t, substeps)
    value = np.eye(l, dtype=np.complex128)
    bound_exp = 0.0
    for theta, h in zip(thetas, widths):
        q = path.eval(theta).reshape(-1, 1)
        gen = np.zeros((l, l), dtype=np.complex128)
        if hs is not None:
            gen += 1j * hs.matrix_at(theta, q)[..., 0]
        if w is not None:
            gen += w.matrix_at(theta, q)[..., 0]
            bound_exp += h * (float(w.lower_bound_at(theta, q)[0]) - w.shift)
        value = expm_stack(-h * gen) @ value
    factor = OrderedFactor(
        value=value, path=path, s=s, t=t, substeps=substeps, bound_exponent=bound_exp
    )
    if factor.norm() > factor.bound() + 1e-8:
        raise InvariantViolation(
            f"ordered factor norm {factor.norm():.12g} exceeds "
            f"exp(-int(w-C)) = {factor.bound():.12g}"
        )
    return factor


@dataclass
class SliceKernelConfig:
    """Regularization and quadrature policy for the one-step kernel.

    ``cutoff_width`` is the Gaussian regularizer coefficient eps in
    exp(-eps |y-x|^2); None picks 0.02 / R^2 with R the truncation radius,
    small enough to leave the stationary-phase value essentially unbiased.
    ``window`` is the truncation radius in units of sqrt(hbar rho / m).
    """

    quadrature: str = "damped_gauss"
    cutoff_width: float | None = None
    quad_points: int = 512
    window: float = 8.0
    action_quad: int = 8
    factor_substeps: int = 8

    def __post_init__(self):
        if self.quadrature not in ("damped_gauss", "filon_gauss"):
            raise KernelError("quadrature must be 'damped_gauss' or 'filon_gauss'")
        if self.quad_points < 16:
            raise KernelError("quad_points must be at least 16")
        if self.window < 4:
            raise KernelError("truncation window must be at least 4")

    def cutoff_for(self, radius: float) -> float:
        if self.cutoff_width is not None:
            return self.cutoff_width
        return 0.02 / radius**2


def _maybe_matrix_z(z_vals, l):
    """Normalize an observable evaluation to (l, l, ...) form."""
    z_vals = np.asarray(z_vals)
    if z_vals.ndim >= 2 and z_vals.shape[0] == l and z_vals.shape[1] == l:
        return z_vals.astype(np.complex128)
    if l != 1:
        raise KernelError("matrix observables must return (l, l, ...) values")
    return z_vals[None, None].astype(np.complex128)


def _scalar_entry(mat_or_none, default=0.0):
    return default if mat_or_none is None else mat_or_none


def _straight_factor_scalar(w, hs, s, t, pos_of_theta, substeps):
    """exp(-int (i hs + w) dtheta) along straight paths, midpoint rule.

    ``pos_of_theta(theta)`` returns positions of shape (1, ...); the result
    has the broadcast shape of those positions.
    """
    rho = t - s
    h = rho / substeps
    acc = 0.0
    for k in range(substeps):
        theta = s + (k + 0.5) * h
        q = pos_of_theta(theta)
        gen = 0.0
        if hs is not None:
            d = hs.diag_at(theta, q)
            gen = gen + 1j * (d[0] if d is not None else hs.matrix_at(theta, q)[0, 0])
        if w is not None:
            d = w.diag_at(theta, q)
            gen = gen + (d[0] if d is not None else w.matrix_at(theta, q)[0, 0])
        acc = acc - h * gen
    return np.exp(acc)


def _straight_factor_matrix(w, hs, s, t, pos_of_theta, substeps, l):
    """Time-ordered product of midpoint exponentials along straight paths.

    Returns an array of shape (..., l, l) over the broadcast position shape.
    """
    rho = t - s
    h = rho / substeps
    value = None
    for k in range(substeps):
        theta = s + (k + 0.5) * h
        q = pos_of_theta(theta)
        gen = np.zeros((l, l) + q.shape[1:], dtype=np.complex128)
        if hs is not None:
            gen += 1j * hs.matrix_at(theta, q)
        if w is not None:
            gen += w.matrix_at(theta, q)
        step = expm_stack(np.moveaxis(-h * gen, (0, 1), (-2, -1)))
        value = step if value is None else step @ value
    if value is None:
        shape = pos_of_theta(s).shape[1:]
        value = np.broadcast_to(np.eye(l, dtype=np.complex128), shape + (l, l)).copy()
    return value


def _fresnel_antiderivative(x):
    """E(x) = int_0^x exp(i u^2 / 2) du via Fresnel integrals."""
    s, c = fresnel(np.asarray(x, dtype=float) / np.sqrt(np.pi))
    return np.sqrt(np.pi) * (c + 1j * s)


def one_step_kernel_apply(
    f: SpinorField,
    p: Potential,
    w: WeightSpec | None,
    hs,
    s: float,
    t: float,
    cfg: SliceKernelConfig | None = None,
    insertion=None,
) -> SpinorField:
    """Apply the one-step sliced kernel (single Fresnel integral), d = 1 only.

    ``insertion`` is an optional (t1, Z) pair with s <= t1 <= t; Z is then
    evaluated at the straight-path position and placed between the two
    ordered-factor halves.
    """
    grid = f.grid
    if grid.dim != 1:
        raise KernelError("the sliced kernel oracle is one-dimensional")
    if grid.points[0] > MAX_ORACLE_POINTS:
        raise KernelError(f"oracle limited to {MAX_ORACLE_POINTS} points")
    rho = t - s
    if rho <= 0:
        raise KernelError("need t > s")
    if cfg is None:
        cfg = SliceKernelConfig()
    l = f.l
    hbar, m, q = p.hbar, p.mass, p.charge
    lam = np.sqrt(hbar * rho / m)
    radius = cfg.window * lam
    eps = cfg.cutoff_for(radius)
    x = grid.axes[0]  # (n,)
    kvec = grid.wavenumbers[0]

    if cfg.quadrature == "damped_gauss":
        nodes, gl_weights = np.polynomial.legendre.leggauss(cfg.quad_points)
        offsets = radius * nodes  # (nq,)
        weights = radius * gl_weights
    else:
        offsets = np.linspace(-radius, radius, cfg.quad_points)
        weights = None

    # f(x + v) for every shared offset v: spectral shift, one FFT per offset
    fhat = np.fft.fft(f.data, axis=1)  # (l, n)
    shift_phase = np.exp(1j * kvec[None, :] * offsets[:, None])  # (nq, n)
    f_shift = np.fft.ifft(fhat[:, None, :] * shift_phase[None], axis=2)  # (l, nq, n)

    # potential part of the action along straight paths (Gauss-Legendre in theta)
    th_nodes, th_weights = np.polynomial.legendre.leggauss(cfg.action_quad)
    thetas = 0.5 * (s + t) + 0.5 * rho * th_nodes
    s_pot = np.zeros((offsets.size, x.size))
    needs_action = (p.v is not None) or p.has_vector_potential
    if needs_action:
        for th, tw in zip(thetas, th_weights):
            frac = (t - th) / rho
            pos = (x[None, :] + offsets[:, None] * frac)[None]  # (1, nq, n)
            val = -q * p.v_at(th, pos)
            if p.has_vector_potential:
                vel = -offsets[:, None] / rho  # (nq, 1), path velocity (x - y)/rho
                val = val + q * vel * p.a_at(th, pos)[0]
            s_pot += 0.5 * rho * tw * val

    def pos_of_theta(theta):
        frac = (t - theta) / rho
        return (x[None, :] + offsets[:, None] * frac)[None]  # (1, nq, n)

    t1 = z_fn = None
    if insertion is not None:
        t1, z_fn = insertion
        if not (s - 1e-12 <= t1 <= t + 1e-12):
            raise KernelError("insertion time outside the slice")
        t1 = min(max(t1, s), t)
    if l == 1:
        factor = _straight_factor_scalar(w, hs, s, t, pos_of_theta, cfg.factor_substeps)
        if z_fn is not None:
            factor = factor * _maybe_matrix_z(z_fn(pos_of_theta(t1)), 1)[0, 0]
        integrand = f_shift * (np.exp(1j * s_pot / hbar) * factor)[None]
    else:
        if z_fn is None:
            fac = _straight_factor_matrix(w, hs, s, t, pos_of_theta, cfg.factor_substeps, l)
        else:
            first = _straight_factor_matrix(w, hs, s, t1, pos_of_theta, cfg.factor_substeps, l) \
                if t1 > s else None
            second = _straight_factor_matrix(w, hs, t1, t, pos_of_theta, cfg.factor_substeps, l) \
                if t1 < t else None
            z_vals = np.moveaxis(_maybe_matrix_z(z_fn(pos_of_theta(t1)), l), (0, 1), (-2, -1))
            fac = z_vals if first is None else z_vals @ first
            fac = fac if second is None else second @ fac
        vec = np.moveaxis(f_shift, 0, -1)[..., None]  # (nq, n, l, 1)
        integrand = np.moveaxis((fac @ vec)[..., 0], -1, 0)  # (l, nq, n)
        integrand = integrand * np.exp(1j * s_pot / hbar)[None]

    reg = np.exp(-eps * offsets**2)
    prefactor = np.sqrt(m / (2.0 * np.pi * hbar * rho)) * np.exp(-0.25j * np.pi)

    if cfg.quadrature == "damped_gauss":
        phase = np.exp(1j * m * offsets**2 / (2.0 * hbar * rho))
        kernel_w = weights * phase * reg  # (nq,)
        out = prefactor * np.einsum("q,lqn->ln", kernel_w, integrand)
    else:
        # Filon: exact Fresnel moments of the quadratic phase, linear g
        u_nodes = offsets / lam
        g = integrand * reg[None, :, None]  # (l, nq, n)
        e_anti = _fresnel_antiderivative(u_nodes)
        m0 = e_anti[1:] - e_anti[:-1]  # (nq-1,)
        exp_half = np.exp(0.5j * u_nodes**2)
        m1 = -1j * (exp_half[1:] - exp_half[:-1]) - u_nodes[:-1] * m0
        du = np.diff(u_nodes)
        ga = g[:, :-1, :]
        gb = g[:, 1:, :]
        cell = ga * m0[None, :, None] + (gb - ga) * (m1 / du)[None, :, None]
        out = (np.exp(-0.25j * np.pi) / np.sqrt(2.0 * np.pi)) * np.sum(cell, axis=1)

    return SpinorField(grid, out)


def sliced_kernel_apply(
    f: SpinorField,
    p: Potential,
    w: WeightSpec | None,
    hs,
    sub,
    cfg: SliceKernelConfig | None = None,
) -> SpinorField:
    """Compose the one-step kernel over a subdivision (oracle scale: nu <= 8)."""
    if sub.nu > MAX_ORACLE_SLICES:
        raise KernelError(f"oracle limited to {MAX_ORACLE_SLICES} slices")
    state = f
    for j in range(sub.nu):
        state = one_step_kernel_apply(
            state, p, w, hs, float(sub.taus[j]), float(sub.taus[j + 1]), cfg
        )
    return state


def insert_observables(
    f: SpinorField,
    p: Potential,
    w: WeightSpec | None,
    hs,
    sub,
    insertions,
    cfg: SliceKernelConfig | None = None,
    within_slice: bool = False,
) -> SpinorField:
    """Sliced kernel with matrix observables Z_j inserted at times t_j.

    By default each t_j snaps to the nearest slice boundary and Z_j acts as
    a pointwise multiplication between slice kernels.  With
    ``within_slice=True`` an interior t_j is kept where it is: the slice
    containing it evaluates Z_j at the straight-path position between the
    two halves of the ordered factor.
    """
    if sub.nu > MAX_ORACLE_SLICES:
        raise KernelError(f"oracle limited to {MAX_ORACLE_SLICES} slices")
    times = [float(tj) for tj, _ in insertions]
    if any(b <= a for a, b in zip(times[:-1], times[1:])):
        raise KernelError("insertion times must be strictly increasing")
    if times and (times[0] < -1e-12 or times[-1] > sub.t_end + 1e-12):
        raise KernelError("insertion times must lie in [0, t]")

    X = f.grid.mesh()
    l = f.l

    def apply_z(state, z_fn):
        z_vals = _maybe_matrix_z(z_fn(X), l)
        data = np.einsum("ij...,j...->i...", z_vals, state.data) if l > 1 else (
            z_vals[0, 0][None] * state.data
        )
        return SpinorField(state.grid, data)

    taus = sub.taus
    boundary_jobs = {i: [] for i in range(len(taus))}
    interior_jobs = {j: [] for j in range(sub.nu)}
    for tj, z in insertions:
        idx = int(np.argmin(np.abs(taus - tj)))
        if within_slice and np.abs(taus[idx] - tj) > 1e-12:
            slice_idx = int(np.searchsorted(taus, tj, side="right") - 1)
            slice_idx = min(max(slice_idx, 0), sub.nu - 1)
            interior_jobs[slice_idx].append((float(tj), z))
        else:
            boundary_jobs[idx].append(z)

    state = f
    for j in range(sub.nu):
        for z in boundary_jobs[j]:
            state = apply_z(state, z)
        inserts = interior_jobs[j]
        if len(inserts) > 1:
            raise KernelError("at most one within-slice insertion per slice")
        state = one_step_kernel_apply(
            state,
            p,
            w,
            hs,
            float(taus[j]),
            float(taus[j + 1]),
            cfg,
            insertion=inserts[0] if inserts else None,
        )
    for z in boundary_jobs[len(taus) - 1]:
        state = apply_z(state, z)
    return state
