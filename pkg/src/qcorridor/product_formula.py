"""Interleaved unitary/damping evolutions and convergence drivers.

Given a subdivision 0 = tau_0 < ... < tau_nu = t with evaluation points
kappa_j, kappa'_j in [tau_j, tau_j+1], the interleaved product applies,
right to left,

    U(t, kappa_{nu-1})
      exp(-rho_{nu-1} W(kappa'_{nu-1}, .)) U(kappa_{nu-1}, kappa_{nu-2})
      ... exp(-rho_0 W(kappa'_0, .)) U(kappa_0, 0) f,

with exposures rho_j = tau_{j+1} - tau_j, alternating exact pointwise
damping with unitary legs.  As the mesh shrinks this converges to the
damped propagator; with a superlinear exposure schedule omega(rho) =
rho^(1+sigma) the damping becomes asymptotically ineffective and the
product converges to the *unitary* flow instead.

The choice of kappa points is free; the limit does not depend on it, which
``kappa_sensitivity`` verifies empirically.  ``convergence_study`` runs a
mesh sweep against a high-accuracy reference and fits the convergence
order on the finest half of the sweep.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .grid import SpinorField, l2_norm, sobolev_norm, field_from_values
from .propagator import (
    BackendError,
    DenseOracle,
    PropagatorConfig,
    evolve_damped,
    evolve_unitary,
)
from .weights import WeightSpec, damping_apply

__all__ = [
    "Subdivision",
    "OmegaSchedule",
    "ConvergenceRecord",
    "make_subdivision",
    "interleaved_evolution",
    "convergence_study",
    "kappa_sensitivity",
]

TAU_SCHEMES = ("uniform", "random-jitter")
KAPPA_SCHEMES = ("left", "right", "midpoint", "random")


@dataclass
class Subdivision:
    """Partition of [0, t] with per-interval evaluation points."""

    t_end: float
    taus: np.ndarray          # nu+1 values, 0 = tau_0 < ... < tau_nu = t
    kappas: np.ndarray        # nu values, kappa_j in [tau_j, tau_j+1]
    kappa_primes: np.ndarray  # nu values, same membership

    def __post_init__(self):
        self.taus = np.asarray(self.taus, dtype=float)
        self.kappas = np.asarray(self.kappas, dtype=float)
        self.kappa_primes = np.asarray(self.kappa_primes, dtype=float)
        if np.any(np.diff(self.taus) <= 0):
            raise ValueError("subdivision times must be strictly increasing")
        if abs(self.taus[0]) > 1e-15 or abs(self.taus[-1] - self.t_end) > 1e-12:
            raise ValueError("subdivision must span [0, t_end]")
        for name, pts in (("kappa", self.kappas), ("kappa'", self.kappa_primes)):
            if pts.shape[0] != self.nu:
                raise ValueError(f"{name} needs one point per interval")
            if np.any(pts < self.taus[:-1] - 1e-14) or np.any(pts > self.taus[1:] + 1e-14):
                raise ValueError(f"{name} points must lie inside their intervals")

    @property
    def nu(self) -> int:
        return len(self.taus) - 1

    @property
    def mesh(self) -> float:
        return float(np.max(np.diff(self.taus)))


def make_subdivision(
    t: float,
    nu: int,
    tau_scheme: str = "uniform",
    kappa_scheme: str = "left",
    seed: int | None = None,
) -> Subdivision:
    """Build a subdivision; random schemes are deterministic in the seed."""
    if nu < 1:
        raise ValueError("nu must be at least 1")
    if tau_scheme not in TAU_SCHEMES:
        raise ValueError(f"tau_scheme must be one of {TAU_SCHEMES}")
    if kappa_scheme not in KAPPA_SCHEMES:
        raise ValueError(f"kappa_scheme must be one of {KAPPA_SCHEMES}")
    rng = np.random.default_rng(seed)
    taus = np.linspace(0.0, t, nu + 1)
    if tau_scheme == "random-jitter" and nu > 1:
        jitter = 0.45 * (t / nu) * rng.uniform(-1.0, 1.0, size=nu - 1)
        taus[1:-1] = taus[1:-1] + jitter
    lo, hi = taus[:-1], taus[1:]
    if kappa_scheme == "left":
        kappas = lo.copy()
        primes = lo.copy()
    elif kappa_scheme == "right":
        kappas = hi.copy()
        primes = hi.copy()
    elif kappa_scheme == "midpoint":
        kappas = 0.5 * (lo + hi)
        primes = kappas.copy()
    else:
        kappas = lo + (hi - lo) * rng.uniform(size=nu)
        primes = lo + (hi - lo) * rng.uniform(size=nu)
    return Subdivision(t_end=t, taus=taus, kappas=kappas, kappa_primes=primes)


@dataclass
class OmegaSchedule:
    """Exposure schedule omega(rho); 'linear' is the plain rho, 'power'
    is coeff * rho^(1+sigma) (asymptotically ineffective measurement)."""

    kind: str = "power"
    sigma: float = 1.0
    coeff: float = 1.0

    def __post_init__(self):
        if self.kind not in ("linear", "power"):
            raise ValueError("omega kind must be 'linear' or 'power'")
        if self.kind == "power" and self.sigma <= 0:
            raise ValueError("power schedule needs sigma > 0")
        if self.coeff <= 0:
            raise ValueError("coeff must be positive")

    def value(self, rho: float) -> float:
        if self.kind == "linear":
            return float(rho)
        return float(self.coeff * rho ** (1.0 + self.sigma))

    def derivative(self, rho: float) -> float:
        if self.kind == "linear":
            return 1.0
        return float(self.coeff * (1.0 + self.sigma) * rho**self.sigma)

    def slope_condition_ok(self, rho_min: float, rho_max: float) -> bool:
        """omega'(rho) >= rho on [rho_min, rho_max] (checked at the binding end)."""
        if self.kind == "linear":
            return True
        rho = rho_min if self.sigma > 1 else rho_max
        return self.derivative(rho) >= rho - 1e-15

    def rescaled_for(self, rho_min: float, rho_max: float) -> "OmegaSchedule":
        """Smallest coeff bump making omega'(rho) >= rho on the sweep range."""
        if self.kind == "linear" or self.slope_condition_ok(rho_min, rho_max):
            return self
        rho = rho_min if self.sigma > 1 else rho_max
        needed = rho / ((1.0 + self.sigma) * rho**self.sigma)
        return replace(self, coeff=max(self.coeff, needed))


@dataclass
class ConvergenceRecord:
    nu: int
    mesh: float
    err_l2: float
    err_b1: float | None = None
    fitted_order: float | None = None


def _leg_config(cfg: PropagatorConfig, ta: float, tb: float) -> PropagatorConfig:
    leg = tb - ta
    dt = min(cfg.dt, leg / 4.0) if leg > 0 else cfg.dt
    return replace(cfg, t0=ta, t1=tb, dt=dt, checkpoint_every=0, checkpoint_dir=None)


def interleaved_evolution(
    f: SpinorField,
    p,
    hs,
    w: WeightSpec,
    sub: Subdivision,
    omega: OmegaSchedule | None = None,
    cfg: PropagatorConfig | None = None,
    observer=None,
) -> SpinorField:
    """Alternate unitary legs with exact pointwise damping over a subdivision.

    Unitary legs run between consecutive kappa points with the configured
    backend at dt <= (leg length)/4, so time-integration error stays below
    the product-formula error being measured.  Damping exposures are the
    interval lengths (or omega of them) evaluated at the kappa' points.
    """
    if cfg is None:
        cfg = PropagatorConfig(t1=sub.t_end)
    if w is not None and w.l != f.l:
        raise BackendError("weight and field spin dimensions differ")
    X = f.grid.mesh()
    dense = None
    if cfg.backend == "dense_oracle":
        dense = DenseOracle(f.grid, p, hs=hs, l=f.l)

    def unitary_leg(state, ta, tb):
        if tb <= ta + 1e-15:
            return state
        if dense is not None:
            return SpinorField(state.grid, dense.apply(state.data, None, ta, tb))
        return evolve_unitary(state, p, hs, _leg_config(cfg, ta, tb))

    state = f
    taus = sub.taus
    kappas = sub.kappas
    primes = sub.kappa_primes
    prev = 0.0
    for j in range(sub.nu):
        state = unitary_leg(state, prev, kappas[j])
        rho = taus[j + 1] - taus[j]
        exposure = omega.value(rho) if omega is not None else rho
        if w is not None and exposure > 0:
            state = SpinorField(
                state.grid, damping_apply(w, primes[j], X, exposure, state.data)
            )
        prev = kappas[j]
        if observer is not None:
            observer(taus[j + 1], state)
    state = unitary_leg(state, prev, sub.t_end)
    return state


def _reference_solution(f, p, hs, w, t, omega, cfg, mesh_min):
    """High-accuracy target: damped flow for plain exposures, unitary for omega."""
    n_unknowns = f.l * int(np.prod(f.grid.shape))
    target_weight = None if omega is not None else w
    if n_unknowns <= 8192:
        oracle = DenseOracle(f.grid, p, hs=hs, l=f.l)
        ref = SpinorField(f.grid, oracle.apply(f.data, target_weight, 0.0, t))
        return ref, {"reference": "dense_oracle", "consistency_gap": None}
    dt = mesh_min / 64.0
    ref_a = evolve_damped(f, p, hs, target_weight, replace(cfg, t0=0.0, t1=t, dt=dt))
    ref_b = evolve_damped(f, p, hs, target_weight, replace(cfg, t0=0.0, t1=t, dt=dt / 2))
    gap = l2_norm(field_from_values(f.grid, ref_a.data - ref_b.data))
    return ref_b, {"reference": f"spectral_strang dt={dt:g}", "consistency_gap": gap}


def _fit_order(meshes, errors):
    """Least-squares slope of log err vs log mesh over the finest half."""
    meshes = np.asarray(meshes, dtype=float)
    errors = np.asarray(errors, dtype=float)
    order = np.argsort(meshes)
    meshes, errors = meshes[order], errors[order]
    half = max(2, len(meshes) // 2 + len(meshes) % 2)
    sel = slice(0, half)  # finest half (smallest meshes)
    mask = errors[sel] > 0
    if np.count_nonzero(mask) < 2:
        return float("nan")
    return float(
        np.polyfit(np.log(meshes[sel][mask]), np.log(errors[sel][mask]), 1)[0]
    )


def convergence_study(
    f: SpinorField,
    p,
    hs,
    w: WeightSpec,
    t: float,
    nus,
    tau_scheme: str = "uniform",
    kappa_scheme: str = "left",
    omega: OmegaSchedule | None = None,
    cfg: PropagatorConfig | None = None,
    seed: int | None = None,
    b1_errors: bool = False,
):
    """Mesh sweep of the interleaved product against a fixed reference.

    Returns (records, meta).  For omega = None the reference is the damped
    flow; for a power schedule it is the unitary flow.  The fitted order
    uses only the finest half of the sweep.
    """
    nus = sorted(int(n) for n in nus)
    if any(n < 1 for n in nus):
        raise ValueError("all nu values must be >= 1")
    if cfg is None:
        cfg = PropagatorConfig(t1=t)
    mesh_min = t / max(nus)
    if omega is not None:
        omega = omega.rescaled_for(mesh_min, t / min(nus))
    ref, meta = _reference_solution(f, p, hs, w, t, omega, cfg, mesh_min)
    if meta["consistency_gap"] is not None:
        meta["reference_consistent"] = None  # filled below once errors are known
    records = []
    for i, nu in enumerate(nus):
        sub = make_subdivision(
            t, nu, tau_scheme, kappa_scheme,
            seed=None if seed is None else seed + i,
        )
        out = interleaved_evolution(f, p, hs, w, sub, omega=omega, cfg=cfg)
        diff = field_from_values(f.grid, out.data - ref.data)
        rec = ConvergenceRecord(
            nu=nu,
            mesh=sub.mesh,
            err_l2=l2_norm(diff),
            err_b1=sobolev_norm(diff, 1) if b1_errors else None,
        )
        records.append(rec)
    fitted = _fit_order([r.mesh for r in records], [r.err_l2 for r in records])
    for rec in records:
        rec.fitted_order = fitted
    if meta["consistency_gap"] is not None:
        smallest = min(r.err_l2 for r in records)
        meta["reference_consistent"] = bool(
            meta["consistency_gap"] < 0.1 * max(smallest, 1e-300)
        )
    if omega is not None:
        meta["omega"] = {"kind": omega.kind, "sigma": omega.sigma, "coeff": omega.coeff}
    meta["fitted_order"] = fitted
    return records, meta


def kappa_sensitivity(
    f: SpinorField,
    p,
    hs,
    w: WeightSpec,
    t: float,
    nu: int,
    schemes=KAPPA_SCHEMES,
    cfg: PropagatorConfig | None = None,
    seed: int = 0,
):
    """Max pairwise L2 distance between products over kappa placement schemes."""
    outs = {}
    for scheme in schemes:
        sub = make_subdivision(t, nu, "uniform", scheme, seed=seed)
        outs[scheme] = interleaved_evolution(f, p, hs, w, sub, cfg=cfg)
    names = list(outs)
    pair_dist = {}
    worst = 0.0
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            d = l2_norm(
                field_from_values(f.grid, outs[names[i]].data - outs[names[j]].data)
            )
            pair_dist[(names[i], names[j])] = d
            worst = max(worst, d)
    return {"nu": nu, "max_pairwise": worst, "pairs": pair_dist}
