"""Command-line front end: ``hartree-balance <command> --config <path>``.

Every command writes its artifacts under the output directory together with
``manifest.json`` (config hash, package versions, wall time, artifact list,
exit status). Exit codes: 0 success, 2 configuration/domain/regime errors,
3 solver non-convergence or failed verification, 4 integration errors,
130 interrupted.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import logging
import math
import platform
import sys
import time
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from .checkpoint import read_checkpoint, read_sidecar, save_ground_state, sidecar_path, write_checkpoint
from .config import COMMANDS, DEFAULT_GRIDS, RunConfig, parse_config
from .dynamics import (
    TRAJECTORY_COLUMNS,
    Trajectory,
    blowup_monitor,
    evolve,
    virial_check,
    virial_weight,
)
from .errors import ConfigError, FormatError, HartreeError, UsageError
from .functionals import (
    EnergyBreakdown,
    choquard_residual,
    classify_regime,
    d_gamma,
    energy,
    gn_constant_choquard,
    residual_norm,
)
from .ground_state import (
    MASS_TOL,
    POHOZAEV_TOL,
    RESIDUAL_TOL,
    SolverParams,
    VanishingVerdict,
    minimize_critical,
    minimize_global,
    minimize_pohozaev,
    solve_choquard,
    solve_zero_mass,
)
from .reporting import CsvStream, write_json
from .spectral_core import Field, build_kernel, build_kernels, make_grid, make_radial_grid
from .thresholds import (
    SCAN_COLUMNS,
    critical_mass,
    critical_mass_check,
    decay_fit,
    scan_gamma,
    scan_m,
    subadditivity_check,
)

log = logging.getLogger("hartree_balance")

DEFAULT_OUTPUT = "hb_out"
EXIT_INTERRUPTED = 130
EXIT_VERIFY_FAILED = 3


def package_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _timestamp_comment() -> str:
    now = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return f"hartree-balance {package_version()} written {now}"


@dataclass
class RunContext:
    """Output directory plus the list of files written so far."""

    out: Path
    artifacts: list[str] = field(default_factory=list)

    def path(self, name: str) -> Path:
        self.artifacts.append(name)
        return self.out / name

    def stream(self, name: str, columns) -> CsvStream:
        return CsvStream(self.path(name), columns, _timestamp_comment())

    def json(self, name: str, record) -> Path:
        return write_json(self.path(name), record)


# --------------------------------------------------------------------------
# building blocks from the config
# --------------------------------------------------------------------------


def build_grid(cfg: RunConfig, default_kind: str = "tensor"):
    g = cfg.grid
    N = cfg.problem["N"]
    kind = g.get("kind", default_kind)
    if kind == "radial":
        d = DEFAULT_GRIDS["radial"]
        kwargs = {"stretch": g["stretch"]} if "stretch" in g else {}
        return make_radial_grid(N, g.get("M", d["M"]), g.get("R_max", d["R_max"]), **kwargs)
    d = DEFAULT_GRIDS["tensor1" if N == 1 else "tensor3"]
    return make_grid(N, g.get("L", d["L"]), g.get("n", d["n"]))


def build_params(cfg: RunConfig) -> SolverParams:
    s = dict(cfg.solver)
    initial = s.pop("initial", None)
    if initial is not None:
        s["initial"] = read_checkpoint(initial).field
    return SolverParams(seed=cfg.seed, **s)


def _gammas(cfg: RunConfig) -> tuple[float, float]:
    return cfg.problem["gamma1"], cfg.problem["gamma2"]


def _require(cfg: RunConfig, key: str):
    if key not in cfg.problem:
        raise ConfigError(f"command {cfg.command!r} needs [problem] {key}")
    return cfg.problem[key]


def _initial_field(cfg: RunConfig) -> tuple[Field, float, float]:
    """Initial state for the dynamics commands: a checkpoint or a Gaussian."""
    path = cfg.io.get("checkpoint")
    if path is not None:
        ck = read_checkpoint(path)
        g1, g2 = ck.gamma1, ck.gamma2
        if "gamma1" in cfg.problem and (cfg.problem["gamma1"], cfg.problem.get("gamma2")) != (g1, g2):
            raise ConfigError(
                f"config exponents ({cfg.problem['gamma1']}, {cfg.problem.get('gamma2')}) differ from "
                f"the checkpoint's ({g1}, {g2})"
            )
        if g2 == 0.0:
            raise ConfigError("dynamics needs a two-kernel checkpoint (gamma2 > 0)")
        return ck.field, g1, g2
    for key in ("N", "gamma1", "gamma2"):
        _require(cfg, key)
    grid = build_grid(cfg)
    if grid.kind != "tensor":
        raise UsageError("dynamics runs on tensor grids")
    d = cfg.dynamics
    sigma = d.get("sigma", 1.0)
    amplitude = d.get("amplitude", 1.0)
    return Field(grid, amplitude * grid.gaussian(sigma)), *_gammas(cfg)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_choquard(cfg: RunConfig, ctx: RunContext) -> dict:
    grid = build_grid(cfg)
    gamma = cfg.problem["gamma"]
    gs = solve_choquard(grid, gamma, build_params(cfg))
    save_ground_state(ctx.path("choquard.hbal"), gs)
    ctx.artifacts.append("choquard.json")
    gn = gn_constant_choquard(grid.N, gamma, gs.c) if grid.N >= 1 else math.nan
    return {"mass": gs.c, "E": gs.E, "Q": gs.Q, "residual": gs.residual, "gn_constant": gn}


def cmd_ground_state(cfg: RunConfig, ctx: RunContext) -> dict:
    g1, g2 = _gammas(cfg)
    params = build_params(cfg)
    if cfg.problem.get("zero_mass", False):
        grid = build_grid(cfg, "radial")
        gs = solve_zero_mass(grid, build_kernels(grid, g1, g2), params)
    else:
        c = _require(cfg, "c")
        grid = build_grid(cfg)
        kernels = build_kernels(grid, g1, g2)
        regime = classify_regime(g1)
        if regime == "subcritical":
            gs = minimize_global(grid, c, kernels, params)
            if isinstance(gs, VanishingVerdict):
                write_checkpoint(ctx.path("vanishing_witness.hbal"), gs.field, g1, g2)
                record = {
                    "verdict": gs.verdict,
                    "c": gs.c,
                    "m_estimate": gs.m_estimate,
                    "t": gs.t,
                    "collapse_factor": gs.collapse_factor,
                    "negativity_ratio": gs.ratio,
                    "iterations": gs.iterations,
                }
                ctx.json("vanishing.json", record)
                return record
        elif regime == "critical":
            gs = minimize_critical(grid, c, kernels, params)
        else:
            gs = minimize_pohozaev(grid, c, kernels, params)
    save_ground_state(ctx.path("ground_state.hbal"), gs)
    ctx.artifacts.append("ground_state.json")
    return {"verdict": "attained", **gs.sidecar()}


def _scan(cfg: RunConfig, ctx: RunContext, which: str) -> dict:
    g1, g2 = _gammas(cfg)
    grid = build_grid(cfg)
    kernels = build_kernels(grid, g1, g2)
    params = build_params(cfg)
    workers = cfg.io.get("workers")
    with ctx.stream("scan.csv", SCAN_COLUMNS) as stream:
        on_row = lambda r: stream.write(r.row())  # noqa: E731
        if which == "m":
            res = scan_m(grid, kernels, cfg.problem["c_list"], params, workers, on_row=on_row)
        else:
            res = scan_gamma(grid, kernels, cfg.problem["c_list"], params, workers, on_row=on_row)
    summary = res.summary()
    ctx.json("scan_summary.json", summary)
    return summary


def cmd_scan_m(cfg: RunConfig, ctx: RunContext) -> dict:
    return _scan(cfg, ctx, "m")


def cmd_scan_gamma(cfg: RunConfig, ctx: RunContext) -> dict:
    return _scan(cfg, ctx, "gamma")


def cmd_critical_mass(cfg: RunConfig, ctx: RunContext) -> dict:
    grid = build_grid(cfg)
    cm = critical_mass(grid, build_params(cfg))
    save_ground_state(ctx.path("q2.hbal"), cm.choquard)
    ctx.artifacts.append("q2.json")
    record = critical_mass_check(cm, grid, cfg.problem["gamma2"]).to_dict()
    ctx.json("critical_mass.json", record)
    return record


def _run_dynamics(cfg: RunConfig, ctx: RunContext, default_weight: bool) -> tuple[Trajectory, Field, float, float]:
    u0, g1, g2 = _initial_field(cfg)
    d = cfg.dynamics
    kernels = build_kernels(u0.grid, g1, g2) if d.get("nonlinear", True) else None
    R = d.get("R_virial")
    if R is None and default_weight:
        R = u0.grid.L / 4.5
    weight = virial_weight(R) if R is not None else None
    with ctx.stream("trajectory.csv", TRAJECTORY_COLUMNS) as stream:
        traj = evolve(
            u0,
            kernels,
            d.get("T", 1.0),
            d.get("dt", 1e-3),
            monitor_every=d.get("monitor_every", 10),
            adaptive=d.get("adaptive", True),
            weight=weight,
            tail_radius=d.get("tail_radius"),
            on_sample=lambda s: stream.write(s.row()),
        )
    write_checkpoint(ctx.path("final.hbal"), traj.final, g1, g2)
    return traj, u0, g1, g2


def _trajectory_summary(traj: Trajectory) -> dict:
    mass = traj.column("mass")
    E = traj.column("energy")
    return {
        "steps": traj.steps,
        "halvings": traj.halvings,
        "stop_reason": traj.stop_reason,
        "t_final": traj.samples[-1].t,
        "mass_drift": float(np.max(np.abs(mass - mass[0])) / mass[0]),
        "energy_drift": float(np.max(np.abs(E - E[0])) / max(abs(E[0]), 1e-300)),
    }


def cmd_evolve(cfg: RunConfig, ctx: RunContext) -> dict:
    traj, *_ = _run_dynamics(cfg, ctx, default_weight=False)
    summary = _trajectory_summary(traj)
    ctx.json("evolve_summary.json", summary)
    return summary


def cmd_virial(cfg: RunConfig, ctx: RunContext) -> dict:
    traj, *_ = _run_dynamics(cfg, ctx, default_weight=True)
    summary = {**_trajectory_summary(traj), **virial_check(traj).to_dict()}
    ctx.json("virial.json", summary)
    return summary


def cmd_blowup(cfg: RunConfig, ctx: RunContext) -> dict:
    traj, u0, g1, g2 = _run_dynamics(cfg, ctx, default_weight=False)
    v = blowup_monitor(traj)
    E0 = energy(u0, build_kernels(u0.grid, g1, g2)).energy
    summary = {
        **_trajectory_summary(traj),
        "initial_energy": E0,
        "verdict": v.verdict,
        "gradient_growth": v.growth,
        "growth_time": v.time,
        "h1_ratio": v.h1_ratio,
    }
    ctx.json("blowup.json", summary)
    return summary


def cmd_decay_fit(cfg: RunConfig, ctx: RunContext) -> dict:
    path = cfg.io.get("checkpoint")
    if path is not None:
        ck = read_checkpoint(path)
        u, g2 = ck.field, ck.gamma2
    else:
        g1, g2 = _gammas(cfg)
        grid = build_grid(cfg, "radial")
        gs = solve_zero_mass(grid, build_kernels(grid, g1, g2), build_params(cfg))
        save_ground_state(ctx.path("zero_mass.hbal"), gs)
        ctx.artifacts.append("zero_mass.json")
        u = gs.field
    if u.grid.kind != "radial":
        raise UsageError("decay-fit needs a radial field")
    R = u.grid.R_max
    window = cfg.problem.get("window", (R / 4, R / 2))
    record = decay_fit(u, tuple(window), g2).to_dict()
    record["target_exponent"] = 2 - u.grid.N
    record["mass"] = u.grid.mass(u.values)
    ctx.json("decay.json", record)
    return record


def cmd_subadd(cfg: RunConfig, ctx: RunContext) -> dict:
    g1, g2 = _gammas(cfg)
    grid = build_grid(cfg)
    rep = subadditivity_check(grid, cfg.problem["c1"], cfg.problem["c2"], build_kernels(grid, g1, g2), build_params(cfg))
    record = rep.to_dict()
    ctx.json("subadditivity.json", record)
    return record


# --------------------------------------------------------------------------
# verification of stored ground states
# --------------------------------------------------------------------------


@dataclass
class VerifyReport:
    path: str
    regime: str
    mass: float
    E: float
    Q: float
    lam: float
    residual: float
    checks: dict

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def lines(self) -> list[str]:
        out = [
            f"checkpoint {self.path} ({self.regime})",
            f"  mass      {self.mass:.12g}",
            f"  E         {self.E:.12g}",
            f"  Q         {self.Q:.6e}",
            f"  lambda    {self.lam:.12g}",
            f"  residual  {self.residual:.6e}",
        ]
        out += [f"  {name:<9} {'PASS' if ok else 'FAIL'}" for name, ok in self.checks.items()]
        out.append("PASS" if self.passed else "FAIL")
        return out

    def to_dict(self) -> dict:
        return {
            "path": self.path,
            "regime": self.regime,
            "mass": self.mass,
            "E": self.E,
            "Q": self.Q,
            "lambda": self.lam,
            "residual": self.residual,
            "checks": self.checks,
            "passed": self.passed,
        }


def verify(path: str | Path) -> VerifyReport:
    """Recompute mass, E, Q, lambda and the EL residual of a stored ground state.

    The checks use the tolerances recorded in the sidecar: relative mass
    error against the stored c, |Q| against the tolerance times
    (kinetic + D1 + D2), and the relative residual bound. Zero-mass states
    are checked with lambda = 0; single-kernel (Choquard) states with the
    unit multiplier of their normalisation.
    """
    ck = read_checkpoint(path)
    side_file = sidecar_path(path)
    if not side_file.exists():
        raise FormatError(f"missing sidecar {side_file}")
    side = read_sidecar(side_file)
    tol = side.get("tolerances", {"mass": MASS_TOL, "Q": POHOZAEV_TOL, "residual": RESIDUAL_TOL})
    u = ck.field
    grid = u.grid
    regime = side.get("regime", "unknown")
    mass = grid.mass(u.values)
    if ck.gamma2 == 0.0:
        kernel = build_kernel(grid, ck.gamma1)
        A = grid.kinetic(u.values)
        b = EnergyBreakdown(A, d_gamma(u, kernel), 0.0, ck.gamma1, 0.0)
        lam = float(side.get("lambda", 1.0))
        r = choquard_residual(u, lam, kernel)
        res = math.sqrt(grid.inner(r.values, r.values)) / math.sqrt(mass + A)
    else:
        kernels = build_kernels(grid, ck.gamma1, ck.gamma2)
        b = energy(u, kernels)
        c_ref = float(side.get("c", mass))
        lam = 0.0 if regime == "zero-mass" else (b.d_gamma1 - b.d_gamma2 - b.kinetic) / c_ref
        res = residual_norm(u, lam, kernels)
    c_ref = float(side.get("c", mass))
    checks = {
        "mass": abs(mass - c_ref) <= tol["mass"] * c_ref,
        "pohozaev": abs(b.pohozaev) <= tol["Q"] * b.scale,
        "residual": res <= tol["residual"],
    }
    return VerifyReport(str(path), regime, mass, b.energy, b.pohozaev, lam, res, checks)


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

HANDLERS = {
    "choquard": cmd_choquard,
    "ground-state": cmd_ground_state,
    "scan-m": cmd_scan_m,
    "scan-gamma": cmd_scan_gamma,
    "critical-mass": cmd_critical_mass,
    "evolve": cmd_evolve,
    "virial": cmd_virial,
    "blowup": cmd_blowup,
    "decay-fit": cmd_decay_fit,
    "subadd": cmd_subadd,
}


def _manifest(
    cfg: RunConfig,
    overrides: dict,
    ctx: RunContext,
    wall: float,
    status: str,
    code: int,
    message: str | None,
) -> None:
    record = {
        "command": cfg.command,
        "config_hash": hashlib.sha256(cfg.text.encode()).hexdigest(),
        "seed": cfg.seed,
        "versions": {
            "hartree_balance": package_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "wall_time": wall,
        "status": status,
        "exit_code": code,
        "message": message,
        "overrides": overrides,
        "artifacts": sorted({a for a in ctx.artifacts if (ctx.out / a).exists()} | {"manifest.json"}),
    }
    write_json(ctx.out / "manifest.json", record)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hartree-balance", description="Ground states and dynamics of competing Hartree equations.")
    p.add_argument("command", choices=COMMANDS, help="command to run (overrides [run] command)")
    p.add_argument("--config", help="path of the run configuration")
    p.add_argument("--out", help="output directory (overrides [io] output)")
    p.add_argument("--seed", type=int, help="unsigned 64-bit seed (overrides [io] seed)")
    p.add_argument("--checkpoint", help="checkpoint path (overrides [io] checkpoint)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return p


def _load(args) -> tuple[RunConfig, dict]:
    overrides = {}
    if args.out is not None:
        overrides[("io", "output")] = args.out
    if args.seed is not None:
        overrides[("io", "seed")] = str(args.seed)
    if args.checkpoint is not None:
        overrides[("io", "checkpoint")] = args.checkpoint
    if args.config is None:
        if not (args.command == "verify" and args.checkpoint):
            raise ConfigError("--config is required")
        text = ""
    else:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    cfg = parse_config(text, args.command, overrides)
    return cfg, {f"{s}.{k}": v for (s, k), v in overrides.items()}


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg, overrides = _load(args)
    except HartreeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    if cfg.command == "verify":
        try:
            report = verify(cfg.io["checkpoint"])
        except HartreeError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return exc.exit_code
        print("\n".join(report.lines()))
        return 0 if report.passed else EXIT_VERIFY_FAILED
    ctx = RunContext(Path(cfg.io.get("output", DEFAULT_OUTPUT)))
    ctx.out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    status, code, message = "ok", 0, None
    try:
        summary = HANDLERS[cfg.command](cfg, ctx)
        for key in sorted(summary):
            if isinstance(summary[key], (int, float, str, bool)):
                print(f"{key}: {summary[key]}")
    except HartreeError as exc:
        status, code, message = "error", exc.exit_code, f"{type(exc).__name__}: {exc}"
        print(f"error: {exc}", file=sys.stderr)
    except KeyboardInterrupt:
        status, code, message = "interrupted", EXIT_INTERRUPTED, "interrupted"
        print("interrupted; partial outputs kept", file=sys.stderr)
    _manifest(cfg, overrides, ctx, time.perf_counter() - t0, status, code, message)
    return code


if __name__ == "__main__":
    sys.exit(main())
