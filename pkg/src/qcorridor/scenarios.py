"""Scenario drivers, configuration, and result persistence.

A scenario is described by a single JSON document.  Every run resolves the
config, executes deterministically (all randomness is seeded), and writes

* ``manifest.json``   - resolved config, package version, wall clock, and
                        validity flags (boundary-mass check, reference
                        consistency);
* CSV data files      - floats printed with 17 significant digits, so
                        reruns with identical inputs are bit-identical;
* ``*.gp`` scripts    - gnuplot commands for the CSVs (no rendering here).

Scenario keys: corridor, multislit, zeno, aharonov_bohm, convergence,
oracle_compare, verify_weights.  Asserted properties are recorded in the
returned RunResult; a failed property never maps to exit code 0.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import __version__
from .grid import (
    SpinorField,
    boundary_mass,
    field_from_values,
    gaussian_packet,
    l2_norm,
    make_grid,
    save_field,
)
from .potentials import make_potential
from .product_formula import (
    OmegaSchedule,
    convergence_study,
    interleaved_evolution,
    make_subdivision,
)
from .propagator import (
    DenseOracle,
    PropagatorConfig,
    evolve_damped,
    evolve_unitary,
    survival_mass,
)
from .path_kernel import SliceKernelConfig, sliced_kernel_apply
from .weights import (
    WeightSpec,
    ball_confinement_weight,
    bump_region_weight,
    corridor_weight,
    multislit_weight,
    radial_bump,
    scale_weight,
    slit_profile_example,
    smoothstep,
    verify_assumption,
    verify_multislit_bounds,
    zero_weight,
)

__all__ = [
    "ConfigError",
    "RunResult",
    "load_config",
    "apply_overrides",
    "run_scenario",
    "SCENARIOS",
]

BOUNDARY_MASS_LIMIT = 1e-6


class ConfigError(ValueError):
    pass


@dataclass
class RunResult:
    ok: bool = True
    failures: list = dc_field(default_factory=list)
    outputs: list = dc_field(default_factory=list)
    values: dict = dc_field(default_factory=dict)

    def check(self, name: str, passed: bool):
        if not passed:
            self.ok = False
            self.failures.append(name)
        return passed


def load_config(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path}: line {exc.lineno}: {exc.msg}") from exc
    except OSError as exc:
        raise ConfigError(f"config {path}: {exc}") from exc


def apply_overrides(cfg: dict, overrides):
    """Apply KEY=VALUE overrides with dotted paths; values parse as JSON."""
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override '{item}' is not KEY=VALUE")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override '{key}': '{part}' is not a table")
        node[parts[-1]] = value
    return cfg


def _need(cfg: dict, key: str, where: str = "config"):
    if key not in cfg:
        raise ConfigError(f"{where}: missing required field '{key}'")
    return cfg[key]


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    return f"{float(x):.17g}"


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)


def write_gnuplot(path, csv_name, title, xlabel, ylabel, columns):
    lines = [
        "set datafile separator ','",
        f"set title '{title}'",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
        "set key autotitle columnhead",
        "plot " + ", ".join(
            f"'{csv_name}' using 1:{c} with lines" for c in columns
        ),
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)


def emit_manifest(outdir: Path, cfg: dict, started: float, validity: dict):
    manifest = {
        "config": cfg,
        "version": __version__,
        "wall_clock_s": time.time() - started,
        "validity": validity,
    }
    path = outdir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    return str(path)


# --- builders ---------------------------------------------------------------

def build_grid(cfg: dict):
    g = _need(cfg, "grid")
    try:
        return make_grid(_need(g, "dim", "grid"), _need(g, "extents", "grid"),
                         _need(g, "points", "grid"))
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from exc


def build_potential(cfg: dict):
    c = cfg.get("constants", {})
    p = cfg.get("potential", {"key": "free"})
    try:
        return make_potential(
            _need(p, "key", "potential"),
            mass=c.get("mass", 1.0),
            charge=c.get("charge", 1.0),
            hbar=c.get("hbar", 1.0),
            **p.get("params", {}),
        )
    except ValueError as exc:
        raise ConfigError(f"potential: {exc}") from exc


def _trajectory(spec: dict):
    kind = _need(spec, "kind", "trajectory")
    if kind == "fixed":
        point = np.asarray(_need(spec, "point", "trajectory"), dtype=float)
        return lambda t, p=point: p
    if kind == "linear":
        start = np.asarray(_need(spec, "start", "trajectory"), dtype=float)
        vel = np.asarray(_need(spec, "velocity", "trajectory"), dtype=float)
        return lambda t, s=start, v=vel: s + t * v
    if kind == "sine":
        amp = np.asarray(_need(spec, "amplitude", "trajectory"), dtype=float)
        omega = float(spec.get("omega", 1.0))
        phase = float(spec.get("phase", 0.0))
        return lambda t, a=amp, w=omega, ph=phase: a * np.sin(w * t + ph)
    raise ConfigError(f"trajectory: unknown kind '{kind}'")


def _wall_profile(spec: dict):
    kind = spec.get("kind", "k")
    if kind == "k":
        hw = float(spec.get("half_width", 0.25))
        ramp = float(spec.get("ramp", 0.25))

        def k(xd, hw=hw, r=ramp):
            xd = np.asarray(xd, dtype=float)
            return smoothstep((xd + hw + r) / r) * smoothstep((hw + r - xd) / r)

        return ("k", k)
    if kind == "h2":
        scale = float(spec.get("scale", 1.0))
        return ("h2", lambda xd, s=scale: slit_profile_example(np.asarray(xd) / s))
    raise ConfigError(f"wall profile: unknown kind '{kind}'")


def build_weight(cfg: dict, grid, t_max: float = 1.0) -> WeightSpec:
    w = cfg.get("weight")
    if w is None:
        return zero_weight()
    key = _need(w, "key", "weight")
    params = w.get("params", {})
    try:
        if key == "zero":
            return zero_weight(int(params.get("l", 1)))
        if key == "corridor":
            trajs = [_trajectory(t) for t in _need(params, "trajectories", "weight")]
            return corridor_weight(trajs, float(_need(params, "delta", "weight")),
                                   t_max=t_max)
        if key == "ball":
            spec = ball_confinement_weight(
                _need(params, "centers", "weight"),
                _need(params, "radii", "weight"),
                strength=float(params.get("strength", 1.0)),
                grid=grid,
            )
            return spec
        if key == "multislit":
            holes = _need(params, "holes", "weight")
            width = float(params.get("hole_width", 0.25))
            sharp = float(params.get("sharpness", 1.0))
            h1 = lambda xp, w_=width, s_=sharp: s_ * slit_profile_example(  # noqa: E731
                np.sqrt(np.sum(np.asarray(xp, dtype=float) ** 2, axis=0)) / w_
            )
            spec = multislit_weight(
                holes,
                h1,
                _wall_profile(params.get("wall", {"kind": "k"})),
                subtract_offset=bool(params.get("subtract_offset", False)),
                grid=grid,
            )
            n = float(params.get("strength", 1.0))
            return scale_weight(spec, n) if n != 1.0 else spec
        if key == "bump":
            h = radial_bump(
                params.get("center", [0.0] * grid.dim),
                float(_need(params, "r_inner", "weight")),
                float(_need(params, "r_outer", "weight")),
            )
            return bump_region_weight(h, strength=float(params.get("strength", 1.0)))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"weight: {exc}") from exc
    raise ConfigError(f"weight: unknown key '{key}'")


def build_packet(cfg: dict, grid, hbar: float) -> SpinorField:
    pk = cfg.get("packet", {})
    specs = pk if isinstance(pk, list) else [pk]
    total = None
    for spec in specs:
        f = gaussian_packet(
            grid,
            l=int(spec.get("l", 1)),
            center=spec.get("center", 0.0),
            momentum=spec.get("momentum", 0.0),
            width=float(spec.get("width", 1.0)),
            component_weights=spec.get("components"),
            hbar=hbar,
        )
        total = f.data if total is None else total + f.data
    out = SpinorField(grid, total)
    out.data /= l2_norm(out)
    return out


def build_evolution(cfg: dict) -> PropagatorConfig:
    ev = _need(cfg, "evolution")
    try:
        return PropagatorConfig(
            backend=ev.get("backend", "spectral_strang"),
            dt=float(_need(ev, "dt", "evolution")),
            t0=0.0,
            t1=float(_need(ev, "t_final", "evolution")),
        )
    except ValueError as exc:
        raise ConfigError(f"evolution: {exc}") from exc


# --- estimators -------------------------------------------------------------

def fringe_shift(profile_a, profile_b, dx: float) -> float:
    """Lag of b relative to a: integer-lag cross-correlation plus 3-point
    parabolic refinement, in length units."""
    a = np.asarray(profile_a, dtype=float)
    b = np.asarray(profile_b, dtype=float)
    a = a - a.mean()
    b = b - b.mean()
    corr = np.correlate(b, a, mode="full")
    lag0 = int(np.argmax(corr)) - (len(a) - 1)
    i = int(np.argmax(corr))
    if 0 < i < len(corr) - 1:
        y0, y1, y2 = corr[i - 1], corr[i], corr[i + 1]
        denom = y0 - 2 * y1 + y2
        frac = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
    else:
        frac = 0.0
    return (lag0 + frac) * dx


def fringe_visibility(profile, coords, half_window: float) -> float:
    profile = np.asarray(profile, dtype=float)
    mask = np.abs(np.asarray(coords)) <= half_window
    sel = profile[mask]
    hi, lo = float(np.max(sel)), float(np.min(sel))
    return (hi - lo) / (hi + lo) if hi + lo > 0 else 0.0


# --- scenario runners -------------------------------------------------------

def _norm_sq_series(f, p, hs, w, cfg, region=None):
    rows = [(0.0, l2_norm(f) ** 2,
             survival_mass(f, region) if region is not None else None)]

    def observer(t, state):
        rows.append(
            (t, l2_norm(state) ** 2,
             survival_mass(state, region) if region is not None else None)
        )

    final = evolve_damped(f, p, hs, w, cfg, observer=observer)
    return final, rows


def run_corridor(cfg: dict, outdir: Path) -> RunResult:
    started = time.time()
    res = RunResult()
    grid = build_grid(cfg)
    p = build_potential(cfg)
    ev = build_evolution(cfg)
    w = build_weight(cfg, grid, t_max=ev.t1)
    f = build_packet(cfg, grid, p.hbar)
    params = cfg.get("corridor", {})
    delta = float(cfg.get("weight", {}).get("params", {}).get("delta", 1.0))
    traj_specs = cfg.get("weight", {}).get("params", {}).get("trajectories", [])
    traj0 = _trajectory(traj_specs[0]) if traj_specs else (lambda t: np.zeros(grid.dim))

    def region(X, d=delta):
        a0 = np.atleast_1d(traj0(ev.t1))
        return sum((X[i] - a0[i]) ** 2 for i in range(grid.dim)) <= (2 * d) ** 2

    final, rows = _norm_sq_series(f, p, None, w, ev, region=region)
    ts_csv = write_csv(
        outdir / "timeseries.csv",
        ["t", "norm_sq", "survival_mass"],
        rows,
    )
    res.outputs.append(ts_csv)
    res.outputs.append(
        write_gnuplot(outdir / "timeseries.gp", "timeseries.csv",
                      "norm decay", "t", "norm^2", [2, 3])
    )
    save_field(final, outdir / "final_state.qcf")
    res.outputs.append(str(outdir / "final_state.qcf"))

    nu = int(params.get("product_nu", 32))
    sub = make_subdivision(ev.t1, nu, "uniform",
                           params.get("kappa_scheme", "left"),
                           seed=cfg.get("seed", 0))
    prod = interleaved_evolution(f, p, None, w, sub, cfg=ev)
    err = l2_norm(field_from_values(grid, prod.data - final.data))
    res.values["product_error_l2"] = err
    res.values["final_norm_sq"] = l2_norm(final) ** 2
    write_csv(outdir / "product_error.csv", ["nu", "err_l2"], [(nu, err)])
    max_err = params.get("assert_product_error")
    if max_err is not None:
        res.check(f"product error {err:.3e} <= {max_err}", err <= float(max_err))

    bmass = boundary_mass(final)
    valid = bmass < BOUNDARY_MASS_LIMIT
    res.check("boundary mass within limit", valid)
    emit_manifest(outdir, cfg, started,
                  {"boundary_mass": bmass, "boundary_mass_ok": valid})
    return res


def run_multislit(cfg: dict, outdir: Path) -> RunResult:
    started = time.time()
    res = RunResult()
    grid = build_grid(cfg)
    if grid.dim != 2:
        raise ConfigError("multislit scenario requires a 2-d grid")
    p = build_potential(cfg)
    ev = build_evolution(cfg)
    f = build_packet(cfg, grid, p.hbar)
    ms = cfg.get("multislit", {})
    screen = float(ms.get("screen", grid.extents[1][1] * 0.6))
    half_window = float(ms.get("visibility_half_window", 3.0))
    variants = ms.get("variants")
    base_params = cfg.get("weight", {}).get("params", {})
    if variants is None:
        variants = [{"holes": base_params.get("holes", [[0.0]])}]

    X = grid.mesh()
    screen_idx = int(np.argmin(np.abs(grid.axes[1] - screen)))
    rows_vis = []
    profiles = {}
    for idx, variant in enumerate(variants):
        wcfg = {"weight": {"key": "multislit",
                           "params": {**base_params, **variant}}}
        w = build_weight(wcfg, grid)
        wall_mask = w.diag_at(0.0, X)[0] > 0.5 * np.log(max(len(variant.get(
            "holes", base_params.get("holes", [[0.0]]))), 2))
        overlap = survival_mass(f, wall_mask)
        if overlap > 1e-6 and float(variant.get("strength",
                                                base_params.get("strength", 1.0))) > 0:
            raise ConfigError(
                f"multislit: packet overlaps the wall (mass {overlap:.2e} > 1e-6)"
            )
        final = evolve_damped(f, p, None, w, ev)
        intensity = np.abs(final.data[0][:, screen_idx]) ** 2
        name = f"profile_{idx}"
        profiles[name] = intensity
        vis = fringe_visibility(intensity, grid.axes[0], half_window)
        rows_vis.append((idx, len(variant.get("holes",
                                              base_params.get("holes", []))), vis))
        res.values[f"visibility_{idx}"] = vis
        res.outputs.append(
            write_csv(outdir / f"{name}.csv", ["coordinate", "intensity"],
                      list(zip(grid.axes[0], intensity)))
        )
        res.outputs.append(
            write_gnuplot(outdir / f"{name}.gp", f"{name}.csv",
                          f"transmitted intensity (variant {idx})",
                          "x'", "intensity", [2])
        )
        bmass = boundary_mass(final)
        res.check(f"variant {idx} boundary mass", bmass < BOUNDARY_MASS_LIMIT)
    res.outputs.append(
        write_csv(outdir / "visibility.csv", ["variant", "n_holes", "visibility"],
                  rows_vis)
    )
    emit_manifest(outdir, cfg, started, {"boundary_mass_ok": res.ok})
    return res


def run_zeno(cfg: dict, outdir: Path) -> RunResult:
    started = time.time()
    res = RunResult()
    grid = build_grid(cfg)
    p = build_potential(cfg)
    ev = build_evolution(cfg)
    f = build_packet(cfg, grid, p.hbar)
    zn = cfg.get("zeno", {})
    strengths = zn.get("strengths", [1.0, 10.0, 100.0])
    base = cfg.get("weight", {}).get("params", {})
    centers = base.get("centers", [[0.0] * grid.dim])
    radii = base.get("radii", [1.0])
    center0 = np.asarray(centers[0], dtype=float)
    radius0 = float(radii[0])

    def region(X):
        return sum((X[i] - center0[i]) ** 2 for i in range(grid.dim)) <= radius0**2

    if survival_mass(f, region) < 0.5:
        raise ConfigError("zeno: initial packet is not inside the ball")

    final_rows = []
    for n in strengths:
        w = ball_confinement_weight(centers, radii, strength=float(n), grid=grid) \
            if n > 0 else zero_weight()
        final, rows = _norm_sq_series(f, p, None, w, ev, region=region)
        res.outputs.append(
            write_csv(outdir / f"timeseries_n{n:g}.csv",
                      ["t", "norm_sq", "survival_mass"], rows)
        )
        final_rows.append((n, rows[-1][1], rows[-1][2]))
        nu = int(zn.get("product_nu", 16))
        sub = make_subdivision(ev.t1, nu, "uniform", "left", seed=cfg.get("seed", 0))
        prod = interleaved_evolution(f, p, None, w, sub, cfg=ev)
        err = l2_norm(field_from_values(grid, prod.data - final.data))
        res.values[f"product_error_n{n:g}"] = err
    res.outputs.append(
        write_csv(outdir / "final_by_strength.csv",
                  ["strength", "norm_sq", "survival_mass"], final_rows)
    )
    res.outputs.append(
        write_gnuplot(outdir / "final_by_strength.gp", "final_by_strength.csv",
                      "norm loss vs strength", "n", "norm^2", [2, 3])
    )
    losses = [1.0 - r[1] for r in final_rows]
    if zn.get("assert_monotone_loss", True) and len(losses) > 1:
        res.check("norm loss monotone in strength",
                  all(b >= a - 1e-12 for a, b in zip(losses[:-1], losses[1:])))
    emit_manifest(outdir, cfg, started, {"strengths": list(strengths)})
    return res


def run_aharonov_bohm(cfg: dict, outdir: Path) -> RunResult:
    started = time.time()
    res = RunResult()
    grid = build_grid(cfg)
    if grid.dim != 2:
        raise ConfigError("aharonov_bohm scenario requires a 2-d grid")
    ab = cfg.get("aharonov_bohm", {})
    c = cfg.get("constants", {})
    hbar = c.get("hbar", 1.0)
    charge = c.get("charge", 1.0)
    mass = c.get("mass", 1.0)
    flux = float(ab.get("flux", np.pi * hbar / charge))
    core = float(ab.get("core_radius", 0.4))
    ev = build_evolution(cfg)
    if ev.backend == "spectral_strang":
        raise ConfigError("aharonov_bohm: spectral_strang cannot carry A != 0; "
                          "use mol_rk4")
    w = build_weight(cfg, grid)
    f = build_packet(cfg, grid, hbar)
    screen = float(ab.get("screen", grid.extents[0][1] * 0.6))
    screen_idx = int(np.argmin(np.abs(grid.axes[0] - screen)))
    period = 2.0 * np.pi * hbar / charge

    def profile_for(alpha):
        p = make_potential("solenoid", mass=mass, charge=charge, hbar=hbar,
                           flux=alpha, core_radius=core)
        final = evolve_damped(f, p, None, w, ev)
        return np.abs(final.data[0][screen_idx, :]) ** 2, final

    prof_alpha, final_alpha = profile_for(flux)
    prof_zero, _ = profile_for(0.0)
    prof_period, _ = profile_for(flux + period)
    dy = grid.spacings[1]
    shift = fringe_shift(prof_zero, prof_alpha, dy)
    res.values["fringe_shift"] = shift
    res.values["predicted_shift_fraction"] = (charge * flux / (2 * np.pi * hbar)) % 1.0
    denom = np.linalg.norm(prof_alpha) or 1.0
    periodicity_gap = float(np.linalg.norm(prof_alpha - prof_period) / denom)
    res.values["flux_periodicity_gap_l2"] = periodicity_gap
    for name, prof in (("screen_flux", prof_alpha), ("screen_zero", prof_zero),
                       ("screen_flux_plus_period", prof_period)):
        res.outputs.append(
            write_csv(outdir / f"{name}.csv", ["coordinate", "intensity"],
                      list(zip(grid.axes[1], prof)))
        )
    res.outputs.append(
        write_gnuplot(outdir / "screen.gp", "screen_flux.csv",
                      "screen intensity", "y", "intensity", [2])
    )
    res.outputs.append(
        write_csv(outdir / "summary.csv",
                  ["fringe_shift", "predicted_fraction", "periodicity_gap_l2"],
                  [(shift, res.values["predicted_shift_fraction"], periodicity_gap)])
    )
    max_gap = ab.get("assert_periodicity_gap")
    if max_gap is not None:
        res.check(f"flux periodicity gap {periodicity_gap:.3e} <= {max_gap}",
                  periodicity_gap <= float(max_gap))
    bmass = boundary_mass(final_alpha)
    res.check("boundary mass within limit", bmass < BOUNDARY_MASS_LIMIT)
    emit_manifest(outdir, cfg, started,
                  {"boundary_mass": bmass, "flux": flux, "period": period})
    return res


def run_convergence(cfg: dict, outdir: Path) -> RunResult:
    started = time.time()
    res = RunResult()
    grid = build_grid(cfg)
    p = build_potential(cfg)
    ev = build_evolution(cfg)
    w = build_weight(cfg, grid, t_max=ev.t1)
    f = build_packet(cfg, grid, p.hbar)
    cv = cfg.get("convergence", {})
    omega_cfg = cv.get("omega")
    omega = None
    if omega_cfg:
        omega = OmegaSchedule(
            kind=omega_cfg.get("kind", "power"),
            sigma=float(omega_cfg.get("sigma", 1.0)),
            coeff=float(omega_cfg.get("coeff", 1.0)),
        )
    records, meta = convergence_study(
        f, p, None, w, ev.t1,
        cv.get("nus", [8, 16, 32, 64]),
        tau_scheme=cv.get("tau_scheme", "uniform"),
        kappa_scheme=cv.get("kappa_scheme", "left"),
        omega=omega,
        cfg=ev,
        seed=cfg.get("seed", 0),
        b1_errors=bool(cv.get("b1_errors", False)),
    )
    rows = [(r.nu, r.mesh, r.err_l2, r.err_b1, r.fitted_order) for r in records]
    res.outputs.append(
        write_csv(outdir / "convergence.csv",
                  ["nu", "mesh", "err_l2", "err_b1", "fitted_order"], rows)
    )
    res.outputs.append(
        write_gnuplot(outdir / "convergence.gp", "convergence.csv",
                      "product-formula convergence", "nu", "err", [3])
    )
    res.values["fitted_order"] = meta["fitted_order"]
    res.values["reference"] = meta["reference"]
    if meta.get("reference_consistent") is False:
        res.check("reference consistency", False)
    min_order = cv.get("assert_min_order")
    if min_order is not None:
        res.check(
            f"fitted order {meta['fitted_order']:.3f} >= {min_order}",
            meta["fitted_order"] >= float(min_order),
        )
    if cv.get("assert_monotone"):
        errs = [r.err_l2 for r in records]
        res.check("errors nonincreasing (10% slack)",
                  all(b <= a * 1.1 for a, b in zip(errs[:-1], errs[1:])))
    emit_manifest(outdir, cfg, started, {"reference": meta["reference"],
                                         "consistent": meta.get("reference_consistent")})
    return res


def run_oracle_compare(cfg: dict, outdir: Path) -> RunResult:
    started = time.time()
    res = RunResult()
    grid = build_grid(cfg)
    p = build_potential(cfg)
    ev = build_evolution(cfg)
    w = build_weight(cfg, grid, t_max=ev.t1)
    f = build_packet(cfg, grid, p.hbar)
    oc = cfg.get("oracle", {})
    kcfg = SliceKernelConfig(
        quadrature=oc.get("quadrature", "damped_gauss"),
        cutoff_width=oc.get("cutoff_width"),
        quad_points=int(oc.get("quad_points", 512)),
        window=float(oc.get("window", 8.0)),
    )
    is_zero = cfg.get("weight") is None or cfg.get("weight", {}).get("key") == "zero"
    if is_zero:
        reference = evolve_unitary(f, p, None, ev)
    else:
        oracle = DenseOracle(grid, p, l=f.l)
        reference = SpinorField(grid, oracle.apply(f.data, w, 0.0, ev.t1))
    rows = []
    for nu in oc.get("nus", [1, 2, 4]):
        sub = make_subdivision(ev.t1, int(nu), "uniform", "left")
        out = sliced_kernel_apply(f, p, None if is_zero else w, None, sub, kcfg)
        err = l2_norm(field_from_values(grid, out.data - reference.data))
        rows.append((nu, err))
        res.values[f"err_nu{nu}"] = err
    res.outputs.append(
        write_csv(outdir / "oracle_compare.csv", ["nu", "err_l2"], rows)
    )
    max_err = oc.get("assert_max_err")
    if max_err is not None:
        res.check("oracle errors within bound",
                  all(e <= float(max_err) for _, e in rows))
    if oc.get("assert_monotone"):
        res.check("oracle error decreasing in nu",
                  all(b <= a for (_, a), (_, b) in zip(rows[:-1], rows[1:])))
    emit_manifest(outdir, cfg, started, {"reference": "unitary" if is_zero else "dense"})
    return res


def run_verify_weights(cfg: dict, outdir: Path) -> RunResult:
    started = time.time()
    res = RunResult()
    grid = build_grid(cfg)
    vw = cfg.get("verify", {})
    w = build_weight(cfg, grid, t_max=float(vw.get("t_max", 1.0)))
    times = vw.get("times", [0.0])
    report = verify_assumption(w, grid, times=times)
    lines = [
        f"margin_min={report.margin_min:.17g}",
        f"growth_ratio_1={report.growth_ratio[1]:.17g}",
        f"growth_ratio_2={report.growth_ratio[2]:.17g}",
        f"bracket_ratio_1={report.bracket_ratio[1]:.17g}",
        f"bracket_ratio_2={report.bracket_ratio[2]:.17g}",
        f"passed={report.passed}",
    ]
    res.values["margin_min"] = report.margin_min
    res.check("lower-bound margin", report.passed)
    if w.parts.get("kind") == "multislit" and not w.parts.get("subtract_offset"):
        ms = verify_multislit_bounds(w, grid)
        lines += [
            f"wall_nonneg_margin={ms.nonneg_margin:.17g}",
            f"wall_min_profile_margin={ms.min_profile_margin:.17g}",
            f"wall_c_star={ms.c_star:.17g}",
            f"wall_passed={ms.passed}",
        ]
        res.check("wall bounds", ms.passed)
    report_path = outdir / "verify_report.txt"
    report_path.write_text("\n".join(lines) + "\n" + report.summary() + "\n",
                           encoding="utf-8")
    res.outputs.append(str(report_path))
    emit_manifest(outdir, cfg, started, {"passed": res.ok})
    return res


SCENARIOS = {
    "corridor": run_corridor,
    "multislit": run_multislit,
    "zeno": run_zeno,
    "aharonov_bohm": run_aharonov_bohm,
    "convergence": run_convergence,
    "oracle_compare": run_oracle_compare,
    "verify_weights": run_verify_weights,
}


def run_scenario(cfg: dict, outdir) -> RunResult:
    scenario = _need(cfg, "scenario")
    if scenario not in SCENARIOS:
        raise ConfigError(
            f"scenario: unknown '{scenario}'; choices: {sorted(SCENARIOS)}"
        )
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    return SCENARIOS[scenario](cfg, outdir)
