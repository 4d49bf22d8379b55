"""Measurement weight matrices and their certification.

A weight is a time-dependent Hermitian l x l matrix field W(t, x), bounded
below in the sense

    W(t, x)  >=  ( w(t, x) - C ) I

for a nonnegative scalar lower-bound function w and a shift constant C >= 0.
The pointwise damping operator exp(-rho W(t, x)) then satisfies the norm
bound ||exp(-rho W)|| <= exp(-rho (w - C)).

Constructors cover the standard measurement setups:

* corridor_weight     - diagonal entries |x - a_j(t)|^2 / (2 delta^2) for
                        recorded trajectories a_j with detector resolution
                        delta (gamma = 1/(2 delta^2));
* ball_confinement_weight - smooth confinement to balls, vanishing
                        identically inside and growing quadratically outside
                        (built on the exp(-1/t) mollifier);
* multislit_weight    - a wall with N transparent holes, evaluated through a
                        numerically stable log-sum-exp;
* bump_region_weight  - a bounded plateau weight n * h_O(x) suppressing an
                        excluded region O;
* sum_weights         - superposition of several walls/weights.

The verify_* functions sample the semidefinite margin and the derivative
growth ratios on a grid and report the empirical constants; they are
diagnostics, not proofs.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import expm as _scipy_expm

__all__ = [
    "WeightSpec",
    "WeightError",
    "InvariantViolation",
    "mollifier",
    "smoothstep",
    "radial_bump",
    "slit_profile_example",
    "zero_weight",
    "constant_weight",
    "corridor_weight",
    "ball_confinement_weight",
    "multislit_weight",
    "bump_region_weight",
    "sum_weights",
    "scale_weight",
    "damping_factor",
    "damping_apply",
    "verify_assumption",
    "verify_multislit_bounds",
    "AssumptionReport",
    "MultislitReport",
]

HERMITICITY_RTOL = 1e-12


class WeightError(ValueError):
    pass


class InvariantViolation(RuntimeError):
    pass


@dataclass
class WeightSpec:
    """Hermitian weight field with companion lower bound and shift.

    ``matrix(t, X)`` returns shape (l, l, ...) for X of shape (d, ...).
    ``diag(t, X)`` is an optional fast path returning real (l, ...) entries
    when the weight is diagonal.  ``lower_bound(t, X)`` returns (...) and
    ``shift`` is the constant C in W >= (w - C) I.  ``time_modulus`` is an
    optional nondecreasing modulus sigma(rho) >= rho bounding the weighted
    sup of W(t, .) - W(s, .) for |t - s| <= rho.
    """

    l: int
    matrix: object
    lower_bound: object
    shift: float = 0.0
    diag: object = None
    time_modulus: object = None
    time_dependent: bool = False
    parts: dict = field(default_factory=dict, repr=False)

    def matrix_at(self, t, X):
        return np.asarray(self.matrix(t, np.asarray(X, dtype=float)))

    def diag_at(self, t, X):
        if self.diag is None:
            return None
        return np.asarray(self.diag(t, np.asarray(X, dtype=float)), dtype=float)

    def lower_bound_at(self, t, X):
        return np.asarray(self.lower_bound(t, np.asarray(X, dtype=float)), dtype=float)

    def modulus(self, rho):
        if self.time_modulus is None:
            return float(rho)
        return float(self.time_modulus(rho))


def mollifier(t):
    """Smooth cutoff: exp(-1/t) for t > 0, identically 0 for t <= 0."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    with np.errstate(divide="ignore", over="ignore"):
        out[pos] = np.exp(-1.0 / t[pos])
    return out if out.ndim else float(out)


def smoothstep(u):
    """C-infinity monotone bridge: 0 for u <= 0, 1 for u >= 1."""
    u = np.asarray(u, dtype=float)
    a = mollifier(u)
    b = mollifier(1.0 - u)
    out = np.where(u <= 0.0, 0.0, np.where(u >= 1.0, 1.0, a / (a + b + 1e-300)))
    return out if out.ndim else float(out)


def slit_profile_example(y):
    """Profile equal to |y|^2/2 for |y| <= 1 and |y| for |y| >= 2, >= 1/2 between.

    The two regimes are joined by a smoothstep blend, which is monotone and
    stays above 1/2 on [1, 2].
    """
    y = np.asarray(y, dtype=float)
    r = np.abs(y)
    s = smoothstep(r - 1.0)
    out = (1.0 - s) * 0.5 * r**2 + s * r
    return out if out.ndim else float(out)


def radial_bump(center, r_inner: float, r_outer: float):
    """Smooth bump h(x): 1 for |x-c| <= r_inner, 0 for |x-c| >= r_outer."""
    if not (0 <= r_inner < r_outer):
        raise WeightError("need 0 <= r_inner < r_outer")
    c = np.atleast_1d(np.asarray(center, dtype=float))

    def h(X, c=c, ri=r_inner, ro=r_outer):
        X = np.asarray(X, dtype=float)
        r = np.sqrt(sum((X[i] - c[i]) ** 2 for i in range(X.shape[0])))
        return 1.0 - smoothstep((r - ri) / (ro - ri))

    return h


def _diag_to_matrix(diag_vals):
    """(l, ...) real diagonal entries -> (l, l, ...) complex matrices."""
    l = diag_vals.shape[0]
    out = np.zeros((l, l) + diag_vals.shape[1:], dtype=np.complex128)
    for j in range(l):
        out[j, j] = diag_vals[j]
    return out


def _diagonal_spec(l, diag_fn, lower_fn, shift, time_modulus=None,
                   time_dependent=False, parts=None):
    def matrix(t, X, _d=diag_fn):
        return _diag_to_matrix(np.asarray(_d(t, X), dtype=float))

    return WeightSpec(
        l=l,
        matrix=matrix,
        diag=diag_fn,
        lower_bound=lower_fn,
        shift=float(shift),
        time_modulus=time_modulus,
        time_dependent=time_dependent,
        parts=parts or {},
    )


def zero_weight(l: int = 1) -> WeightSpec:
    return _diagonal_spec(
        l,
        lambda t, X: np.zeros((l,) + np.shape(X)[1:]),
        lambda t, X: np.zeros(np.shape(X)[1:]),
        0.0,
        parts={"kind": "zero"},
    )


def constant_weight(mat) -> WeightSpec:
    """Constant Hermitian weight; lower bound is its smallest eigenvalue."""
    mat = np.atleast_2d(np.asarray(mat, dtype=np.complex128))
    if not np.allclose(mat, mat.conj().T, rtol=HERMITICITY_RTOL, atol=1e-14):
        raise WeightError("constant weight must be Hermitian")
    l = mat.shape[0]
    lam_min = float(np.linalg.eigvalsh(mat)[0])
    shift = max(0.0, -lam_min)

    def matrix(t, X):
        return np.broadcast_to(
            mat.reshape((l, l) + (1,) * (np.ndim(X) - 1)), (l, l) + np.shape(X)[1:]
        ).copy()

    return WeightSpec(
        l=l,
        matrix=matrix,
        lower_bound=lambda t, X: np.full(np.shape(X)[1:], max(lam_min, 0.0)),
        shift=shift,
        parts={"kind": "constant", "value": mat},
    )


def corridor_weight(trajectories, delta: float, t_max: float = 1.0,
                    lipschitz_samples: int = 257) -> WeightSpec:
    """Quadratic corridor weight around recorded trajectories.

    Diagonal entries (2 delta^2)^-1 |x - a_j(t)|^2, one trajectory per spin
    component; the corridor width is gamma = 1/(2 delta^2).  The lower bound
    is |x|^2/(4 delta^2) with shift A^2/delta^2, A the largest trajectory
    excursion on [0, t_max].  The time modulus is linear with slope taken
    from the sampled Lipschitz constant of the trajectories.
    """
    if delta <= 0:
        raise WeightError("delta must be positive")
    trajs = list(trajectories)
    l = len(trajs)
    if l < 1:
        raise WeightError("need at least one trajectory")
    gamma = 1.0 / (2.0 * delta**2)

    ts = np.linspace(0.0, t_max, lipschitz_samples)
    samples = np.array([[np.atleast_1d(a(t)) for t in ts] for a in trajs], dtype=float)
    amp = float(np.max(np.sqrt(np.sum(samples**2, axis=-1)))) if samples.size else 0.0
    if lipschitz_samples > 1:
        step = ts[1] - ts[0]
        lip = float(
            np.max(np.sqrt(np.sum(np.diff(samples, axis=1) ** 2, axis=-1))) / step
        )
    else:
        lip = 0.0
    shift = amp**2 / delta**2
    # |<x>^-2 (W(t)-W(s))| <= gamma L |t-s| (2|x| + 2A)/<x>^2 <= gamma L (1 + 2A) |t-s|
    slope = max(1.0, gamma * lip * (1.0 + 2.0 * amp))

    def diag(t, X, _trajs=trajs, _g=gamma):
        X = np.asarray(X, dtype=float)
        out = np.empty((l,) + X.shape[1:])
        for j, a in enumerate(_trajs):
            aj = np.atleast_1d(np.asarray(a(t), dtype=float))
            r2 = np.zeros(X.shape[1:])
            for i in range(X.shape[0]):
                r2 = r2 + (X[i] - aj[i]) ** 2
            out[j] = _g * r2
        return out

    def lower(t, X, _g=gamma):
        X = np.asarray(X, dtype=float)
        return 0.5 * _g * sum(X[i] ** 2 for i in range(X.shape[0]))

    return _diagonal_spec(
        l,
        diag,
        lower,
        shift,
        time_modulus=lambda rho, s=slope: s * rho,
        time_dependent=True,
        parts={"kind": "corridor", "delta": delta, "gamma": gamma,
               "amplitude": amp, "lipschitz": lip},
    )


def _sampled_shift(diag_fn, lower_fn, grid, times=(0.0,)) -> float:
    """Estimate C by sampling max(w - min_j W_jj)+ on the box, inflated 10%."""
    X = grid.mesh()
    worst = 0.0
    for t in times:
        gap = lower_fn(t, X) - np.min(np.asarray(diag_fn(t, X)), axis=0)
        worst = max(worst, float(np.max(gap)))
    return 1.1 * max(worst, 0.0)


def ball_confinement_weight(centers, radii, strength: float = 1.0, grid=None) -> WeightSpec:
    """Confinement weight vanishing inside balls |x - a_i| <= b_i.

    Entries  n |x - a_i|^2 f(|x - a_i| - b_i)  with the exp(-1/t) mollifier f,
    so exp(-w_ii) is exactly 1 inside the ball.  The lower bound is
    n |x|^2 f(|x|) / 2; the shift is sampled on ``grid`` when given.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    if np.any(radii < 0):
        raise WeightError("radii must be nonnegative")
    if strength < 0:
        raise WeightError("strength must be nonnegative")
    l = centers.shape[0]
    if radii.shape[0] != l:
        raise WeightError("one radius per center required")

    def diag(t, X, n=strength):
        X = np.asarray(X, dtype=float)
        out = np.empty((l,) + X.shape[1:])
        for i in range(l):
            r = np.sqrt(sum((X[k] - centers[i, k]) ** 2 for k in range(X.shape[0])))
            out[i] = n * r**2 * mollifier(r - radii[i])
        return out

    def lower(t, X, n=strength):
        X = np.asarray(X, dtype=float)
        r = np.sqrt(sum(X[k] ** 2 for k in range(X.shape[0])))
        return 0.5 * n * r**2 * mollifier(r)

    shift = _sampled_shift(diag, lower, grid) if grid is not None else 0.0
    if grid is None:
        # without a sampling box fall back to the safe constant bound w = 0
        lower = lambda t, X: np.zeros(np.shape(X)[1:])  # noqa: E731
    return _diagonal_spec(
        l,
        diag,
        lower,
        shift,
        parts={"kind": "ball", "centers": centers, "radii": radii,
               "strength": strength},
    )


def multislit_weight(hole_centers, h1, wall_profile, subtract_offset: bool = False,
                     grid=None) -> WeightSpec:
    """Wall with N transparent holes as a scalar (l = 1) weight.

    ``hole_centers`` are points in the transverse plane (d-1 coordinates per
    hole), ``h1`` the hole profile (h1 >= 0, h1(0) = 0), and ``wall_profile``
    either ("k", k) with 0 <= k <= 1 or ("h2", h2) for the wall factor
    exp(-h2(x_d)).  The weight is

        W(x) = log N - k(x_d) * log( sum_j exp(-h1(x' - a'_j)) ),

    evaluated through a log-sum-exp shifted by min_j h1 so that linearly
    growing profiles cannot underflow.  The deliberate log N offset keeps
    W >= 0 everywhere; passing subtract_offset=True removes it (a constant
    shift absorbed into the spec's C).

    With the exp(-h2) wall profile the lower bound is
    <x'> exp(-h2(x_d)) / C* with C* sampled on ``grid`` (inflated 10%);
    with a plain k profile the lower bound is 0.
    """
    holes = np.atleast_2d(np.asarray(hole_centers, dtype=float))
    n_holes = holes.shape[0]
    kind, profile = wall_profile
    if kind not in ("k", "h2"):
        raise WeightError("wall_profile must be ('k', fn) or ('h2', fn)")

    h1_origin = float(np.asarray(h1(np.zeros((holes.shape[1], 1)))).ravel()[0])
    if abs(h1_origin) > 1e-12:
        import warnings

        warnings.warn("h1(0) != 0: holes are not fully transparent", stacklevel=2)

    log_n = float(np.log(n_holes))

    def k_at(xd):
        if kind == "k":
            vals = np.asarray(profile(xd), dtype=float)
            if np.any(vals < -1e-12) or np.any(vals > 1.0 + 1e-12):
                raise WeightError("wall profile k must take values in [0, 1]")
            return np.clip(vals, 0.0, 1.0)
        return np.exp(-np.asarray(profile(xd), dtype=float))

    def h1_stack(Xp):
        """h1(x' - a'_j) for every hole; shape (N, ...)."""
        Xp = np.asarray(Xp, dtype=float)
        vals = np.empty((n_holes,) + Xp.shape[1:])
        for j in range(n_holes):
            shifted = Xp - holes[j].reshape((-1,) + (1,) * (Xp.ndim - 1))
            vals[j] = h1(shifted)
        return vals

    def w_scalar(t, X):
        X = np.asarray(X, dtype=float)
        Xp = X[:-1]
        xd = X[-1]
        hv = h1_stack(Xp)
        hmin = np.min(hv, axis=0)
        # log sum_j exp(-h_j) = -hmin + log sum_j exp(-(h_j - hmin))
        lse = -hmin + np.log(np.sum(np.exp(-(hv - hmin)), axis=0))
        out = log_n - k_at(xd) * lse
        if subtract_offset:
            out = out - log_n
        return out

    def diag(t, X):
        return w_scalar(t, X)[None]

    if kind == "h2" and grid is not None:
        X = grid.mesh()
        Xp = X[:-1]
        xprime_w = np.sqrt(1.0 + sum(Xp[i] ** 2 for i in range(Xp.shape[0])))
        wall = np.exp(-np.asarray(profile(X[-1]), dtype=float))
        w_raw = w_scalar(0.0, X)
        if subtract_offset:
            w_raw = w_raw + log_n
        c_star = 1.1 * float(np.max(xprime_w * wall / (1.0 + w_raw)))

        def lower(t, X, c=c_star):
            X = np.asarray(X, dtype=float)
            Xp = X[:-1]
            xw = np.sqrt(1.0 + sum(Xp[i] ** 2 for i in range(Xp.shape[0])))
            return xw * np.exp(-np.asarray(profile(X[-1]), dtype=float)) / c
    else:
        c_star = None
        lower = lambda t, X: np.zeros(np.shape(X)[1:])  # noqa: E731

    parts = {
        "kind": "multislit",
        "holes": holes,
        "h1": h1,
        "wall": (kind, profile),
        "n_holes": n_holes,
        "subtract_offset": subtract_offset,
        "c_star": c_star,
    }
    spec = _diagonal_spec(1, diag, lower, 0.0, parts=parts)
    if grid is not None:
        spec = replace(spec, shift=_sampled_shift(diag, lower, grid))
    elif subtract_offset:
        spec = replace(spec, shift=log_n)
    return spec


def bump_region_weight(h_region, strength: float = 1.0) -> WeightSpec:
    """Bounded scalar weight n * h(x) with 0 <= h <= 1 (plateau over a region)."""
    if strength < 0:
        raise WeightError("strength must be nonnegative")

    def diag(t, X, n=strength):
        vals = np.asarray(h_region(np.asarray(X, dtype=float)), dtype=float)
        return (n * vals)[None]

    return _diagonal_spec(
        1,
        diag,
        lambda t, X: np.zeros(np.shape(X)[1:]),
        0.0,
        parts={"kind": "bump", "strength": strength, "h": h_region},
    )


def sum_weights(specs) -> WeightSpec:
    """Pointwise sum; lower bounds and shifts add."""
    specs = list(specs)
    if not specs:
        raise WeightError("empty weight list")
    l = specs[0].l
    if any(s.l != l for s in specs):
        raise WeightError("cannot sum weights with different spin dimensions")
    all_diag = all(s.diag is not None for s in specs)

    def matrix(t, X):
        return sum(s.matrix_at(t, X) for s in specs)

    diag = (lambda t, X: sum(s.diag_at(t, X) for s in specs)) if all_diag else None

    def lower(t, X):
        return sum(s.lower_bound_at(t, X) for s in specs)

    def modulus(rho):
        return max(float(rho), sum(s.modulus(rho) for s in specs))

    return WeightSpec(
        l=l,
        matrix=matrix,
        diag=diag,
        lower_bound=lower,
        shift=sum(s.shift for s in specs),
        time_modulus=modulus,
        time_dependent=any(s.time_dependent for s in specs),
        parts={"kind": "sum", "members": specs},
    )


def scale_weight(spec: WeightSpec, factor: float) -> WeightSpec:
    """Multiply a weight by a nonnegative scalar (lower bound and shift scale too)."""
    if factor < 0:
        raise WeightError("scale factor must be nonnegative")
    diag = None
    if spec.diag is not None:
        diag = lambda t, X, s=spec, c=factor: c * s.diag_at(t, X)  # noqa: E731
    return WeightSpec(
        l=spec.l,
        matrix=lambda t, X, s=spec, c=factor: c * s.matrix_at(t, X),
        diag=diag,
        lower_bound=lambda t, X, s=spec, c=factor: c * s.lower_bound_at(t, X),
        shift=factor * spec.shift,
        time_modulus=(lambda rho, s=spec, c=factor: max(rho, c * s.modulus(rho)))
        if spec.time_modulus is not None
        else None,
        time_dependent=spec.time_dependent,
        parts={"kind": "scaled", "base": spec, "factor": factor},
    )


# --- pointwise damping ----------------------------------------------------

def _check_hermitian(mat):
    dev = np.linalg.norm(mat - np.swapaxes(mat.conj(), 0, 1))
    scale = max(np.linalg.norm(mat), 1e-300)
    if dev > 1e-10 * scale and dev > 1e-13:
        raise WeightError(f"matrix is not Hermitian (deviation {dev:.3e})")


def damping_factor(w: WeightSpec, t: float, x, rho: float) -> np.ndarray:
    """exp(-rho W(t, x)) at a single point, via Hermitian eigendecomposition."""
    if rho < 0:
        raise WeightError("exposure rho must be nonnegative")
    x = np.atleast_1d(np.asarray(x, dtype=float)).reshape(-1, 1)
    mat = w.matrix_at(t, x)[..., 0]
    _check_hermitian(mat)
    lam, vecs = np.linalg.eigh(mat)
    return (vecs * np.exp(-rho * lam)) @ vecs.conj().T


def damping_apply(w: WeightSpec, t: float, X, rho: float, data: np.ndarray) -> np.ndarray:
    """Apply exp(-rho W(t, .)) pointwise to (l, ...) field data, vectorized."""
    if rho < 0:
        raise WeightError("exposure rho must be nonnegative")
    if rho == 0.0:
        return data.copy()
    diag_vals = w.diag_at(t, X)
    if diag_vals is not None:
        return np.exp(-rho * diag_vals) * data
    mat = w.matrix_at(t, X)  # (l, l, ...)
    stack = np.moveaxis(mat, (0, 1), (-2, -1))
    lam, vecs = np.linalg.eigh(stack)
    phases = np.exp(-rho * lam)
    vec_data = np.moveaxis(data, 0, -1)[..., None]
    coeff = np.swapaxes(vecs.conj(), -2, -1) @ vec_data
    out = vecs @ (phases[..., None] * coeff)
    return np.moveaxis(out[..., 0], -1, 0)


def expm_stack(mats: np.ndarray) -> np.ndarray:
    """Matrix exponential of a (..., l, l) stack (scaling and squaring)."""
    return _scipy_expm(mats)


# --- verification reports --------------------------------------------------

@dataclass
class AssumptionReport:
    margin_min: float
    growth_ratio: dict     # order -> empirical sup ||D^a W|| / (1 + w)
    bracket_ratio: dict    # order -> empirical sup ||D^a W|| / <x>
    passed: bool

    def summary(self) -> str:
        lines = [f"semidefinite margin min: {self.margin_min:.3e}"]
        for order in sorted(self.growth_ratio):
            lines.append(
                f"|alpha|={order}: sup||dW||/(1+w) = {self.growth_ratio[order]:.6g}, "
                f"sup||dW||/<x> = {self.bracket_ratio[order]:.6g}"
            )
        lines.append("PASS" if self.passed else "FAIL")
        return "\n".join(lines)


def _operator_norms(mats):
    """Operator norms of a Hermitian (l, l, ...) stack."""
    stack = np.moveaxis(mats, (0, 1), (-2, -1))
    stack = 0.5 * (stack + np.swapaxes(stack.conj(), -2, -1))
    ev = np.linalg.eigvalsh(stack)
    return np.max(np.abs(ev), axis=-1)


def _fd_derivatives(w, t, X, h, order):
    """Centered finite-difference D^alpha W for all |alpha| = order; list of stacks."""
    d = X.shape[0]
    outs = []
    if order == 1:
        for i in range(d):
            Xp, Xm = X.copy(), X.copy()
            Xp[i] += h
            Xm[i] -= h
            outs.append((w.matrix_at(t, Xp) - w.matrix_at(t, Xm)) / (2 * h))
    elif order == 2:
        w0 = w.matrix_at(t, X)
        for i in range(d):
            Xp, Xm = X.copy(), X.copy()
            Xp[i] += h
            Xm[i] -= h
            outs.append((w.matrix_at(t, Xp) - 2 * w0 + w.matrix_at(t, Xm)) / h**2)
        for i in range(d):
            for j in range(i + 1, d):
                Xpp, Xpm, Xmp, Xmm = X.copy(), X.copy(), X.copy(), X.copy()
                Xpp[i] += h; Xpp[j] += h
                Xpm[i] += h; Xpm[j] -= h
                Xmp[i] -= h; Xmp[j] += h
                Xmm[i] -= h; Xmm[j] -= h
                outs.append(
                    (w.matrix_at(t, Xpp) - w.matrix_at(t, Xpm)
                     - w.matrix_at(t, Xmp) + w.matrix_at(t, Xmm)) / (4 * h**2)
                )
    else:
        raise WeightError("only derivative orders 1 and 2 are sampled")
    return outs


def verify_assumption(w: WeightSpec, grid, times=(0.0,), fd_step=None) -> AssumptionReport:
    """Sample the lower-bound margin and derivative growth ratios of a weight.

    Margin: smallest eigenvalue of W - (w - C) I over the grid and times.
    Ratios: ||D^alpha W|| / (1 + w) and ||D^alpha W|| / <x> for |alpha| = 1, 2,
    by centered differences with step fd_step (grid spacing / 8 by default).
    """
    X = grid.mesh()
    h = fd_step if fd_step is not None else min(grid.spacings) / 8.0
    bracket = np.sqrt(1.0 + sum(X[i] ** 2 for i in range(grid.dim)))
    margin = np.inf
    growth = {1: 0.0, 2: 0.0}
    brk = {1: 0.0, 2: 0.0}
    for t in times:
        mat = w.matrix_at(t, X)
        lower = w.lower_bound_at(t, X) - w.shift
        stack = np.moveaxis(mat, (0, 1), (-2, -1))
        stack = stack - lower[..., None, None] * np.eye(w.l)
        ev_min = np.min(np.linalg.eigvalsh(
            0.5 * (stack + np.swapaxes(stack.conj(), -2, -1))), axis=-1)
        margin = min(margin, float(np.min(ev_min)))
        wvals = w.lower_bound_at(t, X)
        for order in (1, 2):
            for dmat in _fd_derivatives(w, t, X, h, order):
                norms = _operator_norms(dmat)
                growth[order] = max(growth[order], float(np.max(norms / (1.0 + wvals))))
                brk[order] = max(brk[order], float(np.max(norms / bracket)))
    return AssumptionReport(
        margin_min=margin,
        growth_ratio=growth,
        bracket_ratio=brk,
        passed=margin >= -1e-8,
    )


@dataclass
class MultislitReport:
    nonneg_margin: float
    transverse_ratio: dict   # order -> sup |D^alpha W| / <x'>
    min_profile_margin: float
    c_star: float
    passed: bool

    def summary(self) -> str:
        lines = [
            f"W >= 0 margin: {self.nonneg_margin:.3e}",
            f"min-profile margin: {self.min_profile_margin:.3e}",
            f"empirical C*: {self.c_star:.6g}",
        ]
        for order in sorted(self.transverse_ratio):
            lines.append(
                f"|alpha|={order}: sup|dW|/<x'> = {self.transverse_ratio[order]:.6g}"
            )
        lines.append("PASS" if self.passed else "FAIL")
        return "\n".join(lines)


def verify_multislit_bounds(w: WeightSpec, grid, fd_step=None) -> MultislitReport:
    """Sampled checks of the wall-weight bounds (nonnegativity, growth, C*)."""
    parts = w.parts
    if parts.get("kind") != "multislit":
        raise WeightError("weight was not built by multislit_weight")
    if parts.get("subtract_offset"):
        raise WeightError("verification expects the unshifted wall weight")
    X = grid.mesh()
    h = fd_step if fd_step is not None else min(grid.spacings) / 8.0
    vals = w.diag_at(0.0, X)[0]
    nonneg = float(np.min(vals))

    Xp = X[:-1]
    xprime = np.sqrt(1.0 + sum(Xp[i] ** 2 for i in range(Xp.shape[0])))
    ratios = {}
    for order in (1, 2):
        worst = 0.0
        for dmat in _fd_derivatives(w, 0.0, X, h, order):
            worst = max(worst, float(np.max(np.abs(dmat[0, 0]) / xprime)))
        ratios[order] = worst

    holes = parts["holes"]
    h1 = parts["h1"]
    kind, profile = parts["wall"]
    hv = np.empty((parts["n_holes"],) + X.shape[1:])
    for j in range(parts["n_holes"]):
        shifted = Xp - holes[j].reshape((-1,) + (1,) * (Xp.ndim - 1))
        hv[j] = h1(shifted)
    hmin = np.min(hv, axis=0)
    wall = np.exp(-np.asarray(profile(X[-1]), float)) if kind == "h2" \
        else np.clip(np.asarray(profile(X[-1]), float), 0.0, 1.0)
    min_profile_margin = float(np.min(vals - hmin * wall))
    if kind == "h2":
        c_star = float(np.max(xprime * wall / (1.0 + vals)))
    else:
        c_star = float("nan")
    passed = (nonneg >= -1e-10) and (min_profile_margin >= -1e-8)
    return MultislitReport(
        nonneg_margin=nonneg,
        transverse_ratio=ratios,
        min_profile_margin=min_profile_margin,
        c_star=c_star,
        passed=passed,
    )
