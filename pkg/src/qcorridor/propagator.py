"""Time evolution: unitary and measurement-damped propagators.

The evolved equation (hbar, mass, charge from the potential) is

    i hbar du/dt = [ H(t) + hbar Hs(t,x) - i hbar W(t,x) ] u,
    H(t) = (1/2m) sum_j ( (hbar/i) d_j - q A_j )^2 + q V,

with Hermitian spin term Hs and Hermitian weight W.  With W = 0 the flow is
unitary; with W >= 0 it is a contraction.

Backends
--------
spectral_strang
    Second-order Strang splitting, multiplicative half-steps around an exact
    Fourier kinetic step.  Requires A = 0 (the kinetic term must be diagonal
    in momentum space).  Time-dependent coefficients are sampled at the
    midpoint of each half-step.  Norm-exact for W = 0 up to rounding.
mol_rk4
    Method of lines: classical 4-stage Runge-Kutta on the spectrally
    discretized right-hand side.  Supports arbitrary (V, A); the time step
    must respect the kinetic stability limit (checked, hard error).
dense_oracle
    Full dense Hamiltonian assembled with the same spectral derivative
    matrices as the grid code, integrated with tight step control
    (or a single matrix exponential when nothing depends on time).
    Ground truth for the other backends; unknowns capped at 8192.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm as dense_expm

from .grid import Grid, SpinorField, save_field
from .potentials import Potential
from .weights import WeightSpec, damping_apply, expm_stack

__all__ = [
    "SpinTerm",
    "PropagatorConfig",
    "BackendError",
    "evolve_unitary",
    "evolve_damped",
    "expectation_position",
    "survival_mass",
    "DenseOracle",
]

DENSE_MAX_UNKNOWNS = 8192


class BackendError(ValueError):
    pass


@dataclass
class SpinTerm:
    """Hermitian l x l spin coupling Hs(t, x) in frequency units."""

    l: int
    matrix: object                 # (t, X) -> (l, l, ...)
    diag: object = None            # optional (t, X) -> (l, ...) real
    time_dependent: bool = False

    def matrix_at(self, t, X):
        return np.asarray(self.matrix(t, np.asarray(X, dtype=float)))

    def diag_at(self, t, X):
        if self.diag is None:
            return None
        return np.asarray(self.diag(t, np.asarray(X, dtype=float)), dtype=float)


@dataclass
class PropagatorConfig:
    backend: str = "spectral_strang"
    dt: float = 1e-2
    t0: float = 0.0
    t1: float = 1.0
    checkpoint_every: int = 0
    checkpoint_dir: object = None

    def __post_init__(self):
        if self.backend not in ("spectral_strang", "mol_rk4", "dense_oracle"):
            raise BackendError(f"unknown backend '{self.backend}'")
        if self.dt <= 0:
            raise BackendError("dt must be positive")
        if self.t1 < self.t0:
            raise BackendError("t1 must not precede t0")


def _steps(t0: float, t1: float, dt: float):
    """Uniform steps of size dt; the final step is shortened to land on t1."""
    out = []
    t = t0
    while t < t1 - 1e-13 * max(1.0, abs(t1)):
        h = min(dt, t1 - t)
        out.append((t, t + h))
        t += h
    return out


def _vector_potential_is_zero(p: Potential, grid: Grid) -> bool:
    if not p.has_vector_potential:
        return True
    a = p.a_at(0.0, grid.mesh())
    return bool(np.max(np.abs(a)) == 0.0)


def _multiplicative_halfstep(p, hs, w, t_mid, X, h, l):
    """exp(-h/2 (i q V/hbar I + i Hs + W)) evaluated pointwise; (l, ...) or (l,l,...)."""
    phase = (p.charge / p.hbar) * p.v_at(t_mid, X)
    w_diag = w.diag_at(t_mid, X) if w is not None else None
    hs_diag = hs.diag_at(t_mid, X) if hs is not None else None
    diag_ok = (w is None or w_diag is not None) and (hs is None or hs_diag is not None)
    if diag_ok or l == 1:
        gen = np.broadcast_to(1j * phase, (l,) + phase.shape).astype(np.complex128).copy()
        if hs is not None:
            gen += 1j * (hs_diag if hs_diag is not None else hs.matrix_at(t_mid, X)[0, 0])
        if w is not None:
            gen += w_diag if w_diag is not None else w.matrix_at(t_mid, X)[0, 0]
        return np.exp(-0.5 * h * gen), True
    gen = 1j * phase[None, None] * np.eye(l, dtype=np.complex128).reshape(
        (l, l) + (1,) * phase.ndim
    )
    gen = np.broadcast_to(gen, (l, l) + phase.shape).copy()
    if hs is not None:
        gen += 1j * hs.matrix_at(t_mid, X)
    if w is not None:
        gen += w.matrix_at(t_mid, X)
    stack = np.moveaxis(gen, (0, 1), (-2, -1))
    factor = expm_stack(-0.5 * h * stack)
    return np.moveaxis(factor, (-2, -1), (0, 1)), False


def _apply_pointwise(factor, diag_form, data):
    if diag_form:
        return factor * data
    # factor (l, l, ...), data (l, ...)
    return np.einsum("ij...,j...->i...", factor, data)


def _evolve_strang(f, p, hs, w, cfg, observer=None):
    grid = f.grid
    if not _vector_potential_is_zero(p, grid):
        raise BackendError("spectral_strang requires A = 0; use mol_rk4")
    l = f.l
    X = grid.mesh()
    K = grid.kmesh()
    k2 = np.sum(K**2, axis=0)
    data = f.data.copy()
    axes = grid.spatial_axes(offset=1)
    static = (
        not p.time_dependent
        and (hs is None or not hs.time_dependent)
        and (w is None or not w.time_dependent)
    )
    cache = {}
    for (ta, tb) in _steps(cfg.t0, cfg.t1, cfg.dt):
        h = tb - ta
        kin = cache.get(("kin", round(h, 15)))
        if kin is None:
            kin = np.exp(-1j * h * p.hbar * k2 / (2.0 * p.mass))
            cache[("kin", round(h, 15))] = kin
        key = ("mult", round(h, 15))
        if static and key in cache:
            fac1, diag_form = cache[key]
            fac2 = fac1
        else:
            fac1, diag_form = _multiplicative_halfstep(p, hs, w, ta + 0.25 * h, X, h, l)
            if static:
                cache[key] = (fac1, diag_form)
                fac2 = fac1
            else:
                fac2, _ = _multiplicative_halfstep(p, hs, w, ta + 0.75 * h, X, h, l)
        data = _apply_pointwise(fac1, diag_form, data)
        data = np.fft.ifftn(kin[None] * np.fft.fftn(data, axes=axes), axes=axes)
        data = _apply_pointwise(fac2, diag_form, data)
        if observer is not None:
            observer(tb, data)
    return SpinorField(grid, data)


def _rhs_factory(grid: Grid, p: Potential, hs, w, l):
    """du/dt = -(i/hbar) H u - i Hs u - W u on (l, *shape) data."""
    X = grid.mesh()
    K = grid.kmesh()
    k2 = np.sum(K**2, axis=0)
    axes = grid.spatial_axes(offset=1)
    q = p.charge
    hbar = p.hbar
    m = p.mass

    def rhs(t, data):
        fhat = np.fft.fftn(data, axes=axes)
        lap = np.fft.ifftn(-k2[None] * fhat, axes=axes)
        hu = -(hbar**2) * lap
        if p.has_vector_potential:
            A = p.a_at(t, X)
            grads = [
                np.fft.ifftn(1j * K[i][None] * fhat, axes=axes) for i in range(grid.dim)
            ]
            adotgrad = sum(A[i][None] * grads[i] for i in range(grid.dim))
            div_au = sum(
                np.fft.ifftn(
                    1j * K[i][None] * np.fft.fftn(A[i][None] * data, axes=axes),
                    axes=axes,
                )
                for i in range(grid.dim)
            )
            hu = hu + 1j * hbar * q * (div_au + adotgrad) + q**2 * np.sum(A**2, axis=0)[None] * data
        hu = hu / (2.0 * m) + q * p.v_at(t, X)[None] * data
        out = (-1j / hbar) * hu
        if hs is not None:
            hs_diag = hs.diag_at(t, X)
            if hs_diag is not None:
                out = out - 1j * hs_diag * data
            else:
                out = out - 1j * np.einsum("ij...,j...->i...", hs.matrix_at(t, X), data)
        if w is not None:
            w_diag = w.diag_at(t, X)
            if w_diag is not None:
                out = out - w_diag * data
            else:
                out = out - np.einsum("ij...,j...->i...", w.matrix_at(t, X), data)
        return out

    return rhs


def rk4_stability_limit(grid: Grid, p: Potential) -> float:
    """Largest admissible dt for mol_rk4: 0.5 m dx^2 / hbar * (2/pi^2), per axis."""
    dx_min = min(grid.spacings)
    return 0.5 * p.mass * dx_min**2 / p.hbar * (2.0 / np.pi**2)


def _evolve_rk4(f, p, hs, w, cfg, observer=None):
    grid = f.grid
    limit = rk4_stability_limit(grid, p)
    if cfg.dt > limit * (1 + 1e-12):
        raise BackendError(
            f"mol_rk4 step {cfg.dt:g} exceeds the stability limit {limit:g}"
        )
    rhs = _rhs_factory(grid, p, hs, w, f.l)
    data = f.data.copy()
    for (ta, tb) in _steps(cfg.t0, cfg.t1, cfg.dt):
        h = tb - ta
        k1 = rhs(ta, data)
        k2 = rhs(ta + 0.5 * h, data + 0.5 * h * k1)
        k3 = rhs(ta + 0.5 * h, data + 0.5 * h * k2)
        k4 = rhs(tb, data + h * k3)
        data = data + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if observer is not None:
            observer(tb, data)
    return SpinorField(grid, data)


class DenseOracle:
    """Dense discrete Hamiltonian on the flattened (l * n_points) unknowns.

    Spectral derivative matrices are built from the same FFT convention as
    the grid code, so comparisons with the grid backends isolate time
    integration error.
    """

    def __init__(self, grid: Grid, p: Potential, hs=None, l: int = 1):
        n_pts = int(np.prod(grid.shape))
        if l * n_pts > DENSE_MAX_UNKNOWNS:
            raise BackendError(
                f"dense oracle limited to {DENSE_MAX_UNKNOWNS} unknowns, got {l * n_pts}"
            )
        self.grid = grid
        self.p = p
        self.hs = hs
        self.l = l
        self.n_pts = n_pts
        self._d1 = []
        for axis in range(grid.dim):
            n = grid.points[axis]
            F = np.fft.fft(np.eye(n), axis=0)
            k = grid.wavenumbers[axis]
            d1 = np.fft.ifft(1j * k[:, None] * F, axis=0)
            eye_before = np.eye(int(np.prod(grid.points[:axis])) or 1)
            eye_after = np.eye(int(np.prod(grid.points[axis + 1:])) or 1)
            self._d1.append(np.kron(np.kron(eye_before, d1), eye_after))
        self._x_flat = grid.mesh().reshape(grid.dim, -1)
        self._eigh_cache = None

    def hamiltonian(self, t: float) -> np.ndarray:
        """H(t) + hbar Hs as a dense (l n, l n) matrix (weight not included)."""
        p = self.p
        n = self.n_pts
        X = self._x_flat
        if p.has_vector_potential:
            A = p.a_at(t, X)
            h_scalar = np.zeros((n, n), dtype=np.complex128)
            for i in range(self.grid.dim):
                pk = -1j * p.hbar * self._d1[i] - p.charge * np.diag(A[i])
                h_scalar += pk @ pk
            h_scalar /= 2.0 * p.mass
        else:
            h_scalar = np.zeros((n, n), dtype=np.complex128)
            for i in range(self.grid.dim):
                h_scalar += -(p.hbar**2) * (self._d1[i] @ self._d1[i])
            h_scalar /= 2.0 * p.mass
        h_scalar += p.charge * np.diag(p.v_at(t, X))
        if self.l == 1 and self.hs is None:
            return h_scalar
        out = np.kron(np.eye(self.l), h_scalar).astype(np.complex128)
        if self.hs is not None:
            hs_mat = self.hs.matrix_at(t, X)  # (l, l, n)
            for i in range(self.l):
                for j in range(self.l):
                    out[i * n:(i + 1) * n, j * n:(j + 1) * n] += p.hbar * np.diag(
                        hs_mat[i, j]
                    )
        return out

    def weight_matrix(self, w: WeightSpec, t: float) -> np.ndarray:
        n = self.n_pts
        wd = w.diag_at(t, self._x_flat)
        if wd is not None:
            return np.diag(wd.reshape(-1))
        wm = w.matrix_at(t, self._x_flat)
        out = np.zeros((self.l * n, self.l * n), dtype=np.complex128)
        for i in range(self.l):
            for j in range(self.l):
                out[i * n:(i + 1) * n, j * n:(j + 1) * n] = np.diag(wm[i, j])
        return out

    def _static(self, w) -> bool:
        return (
            not self.p.time_dependent
            and (self.hs is None or not self.hs.time_dependent)
            and (w is None or not w.time_dependent)
        )

    def apply(self, data: np.ndarray, w, t0: float, t1: float) -> np.ndarray:
        """Propagate (l, *shape) data from t0 to t1 under the full generator."""
        if t1 == t0:
            return data.copy()
        vec = data.reshape(-1)
        if self._static(w):
            if w is None:
                if self._eigh_cache is None:
                    ham = self.hamiltonian(0.0)
                    self._eigh_cache = np.linalg.eigh(0.5 * (ham + ham.conj().T))
                lam, vecs = self._eigh_cache
                phases = np.exp(-1j * (t1 - t0) * lam / self.p.hbar)
                out = vecs @ (phases * (vecs.conj().T @ vec))
            else:
                gen = (-1j / self.p.hbar) * self.hamiltonian(0.0) - self.weight_matrix(
                    w, 0.0
                )
                out = dense_expm((t1 - t0) * gen) @ vec
            return out.reshape(data.shape)

        def rhs(t, y):
            hy = self.hamiltonian(t) @ y
            out = (-1j / self.p.hbar) * hy
            if w is not None:
                out = out - self.weight_matrix(w, t) @ y
            return out

        sol = solve_ivp(
            rhs,
            (t0, t1),
            vec,
            method="DOP853",
            rtol=1e-11,
            atol=1e-12,
            dense_output=False,
        )
        if not sol.success:
            raise BackendError(f"dense oracle integration failed: {sol.message}")
        return sol.y[:, -1].reshape(data.shape)


def _evolve_dense(f, p, hs, w, cfg, observer=None):
    oracle = DenseOracle(f.grid, p, hs=hs, l=f.l)
    if observer is None:
        data = oracle.apply(f.data, w, cfg.t0, cfg.t1)
        return SpinorField(f.grid, data)
    data = f.data.copy()
    for (ta, tb) in _steps(cfg.t0, cfg.t1, cfg.dt):
        data = oracle.apply(data, w, ta, tb)
        observer(tb, data)
    return SpinorField(f.grid, data)


def evolve_damped(
    f: SpinorField,
    p: Potential,
    hs: SpinTerm | None,
    w: WeightSpec | None,
    cfg: PropagatorConfig,
    observer=None,
) -> SpinorField:
    """Propagate under the damped generator; w = None gives the unitary flow."""
    if w is not None and w.l != f.l:
        raise BackendError(f"weight spin dimension {w.l} != field {f.l}")
    if hs is not None and hs.l != f.l:
        raise BackendError(f"spin term dimension {hs.l} != field {f.l}")
    wrapped = observer
    if observer is not None:
        wrapped = lambda t, data: observer(t, SpinorField(f.grid, data))  # noqa: E731
    if cfg.checkpoint_every and cfg.checkpoint_dir is not None:
        wrapped = _with_checkpoints(wrapped, f.grid, cfg)
    if cfg.backend == "spectral_strang":
        out = _evolve_strang(f, p, hs, w, cfg, observer=wrapped)
    elif cfg.backend == "mol_rk4":
        out = _evolve_rk4(f, p, hs, w, cfg, observer=wrapped)
    else:
        out = _evolve_dense(f, p, hs, w, cfg, observer=wrapped)
    return out.check_finite()


def evolve_unitary(
    f: SpinorField,
    p: Potential,
    hs: SpinTerm | None,
    cfg: PropagatorConfig,
    observer=None,
) -> SpinorField:
    return evolve_damped(f, p, hs, None, cfg, observer=observer)


def _with_checkpoints(observer, grid, cfg):
    import pathlib

    outdir = pathlib.Path(cfg.checkpoint_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    counter = {"step": 0}

    def wrapped(t, data):
        counter["step"] += 1
        if counter["step"] % cfg.checkpoint_every == 0:
            payload = data if isinstance(data, SpinorField) else SpinorField(grid, data)
            save_field(payload, outdir / f"checkpoint_{counter['step']:06d}.qcf")
        if observer is not None:
            observer(t, data)

    return wrapped


def expectation_position(f: SpinorField) -> np.ndarray:
    """<x> = sum x |f|^2 vol / ||f||^2; undefined for the zero field."""
    dens = np.sum(np.abs(f.data) ** 2, axis=0)
    total = float(np.sum(dens)) * f.grid.cell_volume
    if total == 0.0:
        raise ValueError("position expectation undefined for zero field")
    X = f.grid.mesh()
    return np.array(
        [float(np.sum(X[i] * dens)) * f.grid.cell_volume / total for i in range(f.grid.dim)]
    )


def survival_mass(f: SpinorField, region) -> float:
    """Probability mass inside a region (boolean mask or predicate of X)."""
    if callable(region):
        mask = np.asarray(region(f.grid.mesh()), dtype=bool)
    else:
        mask = np.asarray(region, dtype=bool)
    dens = np.sum(np.abs(f.data) ** 2, axis=0)
    return float(np.sum(dens[mask]) * f.grid.cell_volume)
