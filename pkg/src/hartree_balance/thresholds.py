"""Parameter scans, threshold brackets and verdict certificates."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, HartreeError, RegimeError
from .functionals import (
    EnergyBreakdown,
    classify_regime,
    energy,
    fiber_energy,
    subcritical_scan,
)
from .ground_state import (
    GroundState,
    SolverParams,
    VanishingVerdict,
    minimize_critical,
    minimize_global,
    minimize_pohozaev,
    solve_choquard,
    solve_zero_mass,
)
from .spectral_core import Field, Grid, KernelSet, build_kernels

log = logging.getLogger(__name__)

SCAN_COLUMNS = ("c", "value", "verdict", "lambda", "kinetic", "restarts", "message")
UNBOUNDED_LEVEL = -1e6
MONOTONE_SLACK_M = 1e-6
MONOTONE_REL_GAMMA = 1e-3
BRACKET_REL_WIDTH = 0.01
BRACKET_MAX_ITER = 12


# --------------------------------------------------------------------------
# records
# --------------------------------------------------------------------------


@dataclass
class Witness:
    """A field u and a time t with E(u_t) certified by closed-form fiber evaluation."""

    field: Field
    t: float
    energy: float
    breakdown: EnergyBreakdown

    def recompute(self, kernels: KernelSet) -> float:
        return fiber_energy(energy(self.field, kernels), self.t)


@dataclass
class ScanRow:
    c: float
    value: float
    verdict: str  # attained | vanishing | unbounded-below | failed
    lam: float = math.nan
    kinetic: float = math.nan
    restarts: int = 0
    message: str = ""
    state: GroundState | VanishingVerdict | None = field(default=None, repr=False)
    witness: Witness | None = field(default=None, repr=False)

    def row(self) -> tuple:
        return (self.c, self.value, self.verdict, self.lam, self.kinetic, self.restarts, self.message)


@dataclass
class Bracket:
    """Threshold estimate: the verdict differs at the two endpoints."""

    lo: float
    hi: float
    verdict_lo: str
    verdict_hi: str
    iterations: int

    @property
    def width(self) -> float:
        return (self.hi - self.lo) / self.hi

    def to_dict(self) -> dict:
        return {
            "lo": self.lo,
            "hi": self.hi,
            "verdict_lo": self.verdict_lo,
            "verdict_hi": self.verdict_hi,
            "relative_width": self.width,
            "iterations": self.iterations,
        }


@dataclass
class ScanResult:
    rows: list[ScanRow]
    checks: dict = field(default_factory=dict)
    brackets: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "rows": len(self.rows),
            "failed_rows": [r.c for r in self.rows if r.verdict == "failed"],
            "checks": self.checks,
            "brackets": {k: v.to_dict() for k, v in self.brackets.items()},
            "witnesses": [
                {"c": r.c, "t": r.witness.t, "energy": r.witness.energy} for r in self.rows if r.witness is not None
            ],
        }


def worker_count(workers: int | None = None) -> int:
    env = os.environ.get("HB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"HB_THREADS must be an integer, got {env!r}")
    return max(1, workers or 1)


def _run_rows(
    fn: Callable[[float], ScanRow],
    c_list: Sequence[float],
    workers: int | None,
    on_row: Callable[[ScanRow], None] | None = None,
) -> list[ScanRow]:
    """Evaluate rows independently; order (and on_row order) follows c_list."""

    def guarded(c: float) -> ScanRow:
        try:
            return fn(c)
        except HartreeError as exc:
            log.info("scan row c=%g failed: %s", c, exc)
            return ScanRow(c, math.nan, "failed", message=f"{type(exc).__name__}: {exc}")

    rows: list[ScanRow] = []
    n = worker_count(workers)
    with ThreadPoolExecutor(max_workers=n) as pool:
        for r in pool.map(guarded, c_list) if n > 1 else map(guarded, c_list):
            rows.append(r)
            if on_row is not None:
                on_row(r)
    return rows


# --------------------------------------------------------------------------
# witnesses
# --------------------------------------------------------------------------


def fiber_witness(u: Field, kernels: KernelSet, level: float, t_range=(1e-2, 1e6), points: int = 2000) -> Witness | None:
    """First t on a log scan with E(u_t) < level, or None."""
    b = energy(u, kernels)
    ts = np.logspace(math.log10(t_range[0]), math.log10(t_range[1]), points)
    e = fiber_energy(b, ts)
    hit = np.nonzero(e < level)[0]
    if hit.size == 0:
        return None
    t = float(ts[hit[0]])
    return Witness(u, t, fiber_energy(b, t), b)


def fiber_infimum(u: Field, kernels: KernelSet, t_range=(1e-2, 1e3), points: int = 2000) -> float:
    b = energy(u, kernels)
    ts = np.logspace(math.log10(t_range[0]), math.log10(t_range[1]), points)
    return float(np.min(fiber_energy(b, ts)))


# --------------------------------------------------------------------------
# critical mass
# --------------------------------------------------------------------------


@dataclass
class CriticalMass:
    """c~1 = ||Q_2||_2^2 with the Choquard state it came from."""

    value: float
    choquard: GroundState

    def scaled_choquard(self, c: float) -> Field:
        q = self.choquard.field
        return Field(q.grid, q.values.real * math.sqrt(c / self.value))

    def kernels(self, grid: Grid, gamma2: float) -> KernelSet:
        """Kernel pair (2, gamma2) on the grid carrying Q_2."""
        t = grid.L / self.choquard.field.grid.L if grid.kind == "tensor" else grid.R_max / self.choquard.field.grid.R_max
        return build_kernels(grid, 2.0, gamma2).rescaled(t)


def critical_mass(grid: Grid, params: SolverParams | None = None) -> CriticalMass:
    if grid.N < 3:
        raise ConfigError("critical_mass needs N >= 3")
    q = solve_choquard(grid, 2.0, params)
    return CriticalMass(q.c, q)


@dataclass
class CriticalMassCheck:
    """Both sides of the critical mass on the rescaled Q_2 family.

    Below: the fiber infimum of sqrt(c/c~1) Q_2 (never negative in exact
    arithmetic). Above: a fiber point whose energy is below ``level``.
    """

    value: float
    below_c: float
    below_infimum: float
    above_c: float
    above_witness: Witness | None
    level: float

    @property
    def above_energy(self) -> float:
        return self.above_witness.energy if self.above_witness is not None else math.nan

    def to_dict(self) -> dict:
        return {
            "critical_mass": self.value,
            "below_c": self.below_c,
            "below_fiber_infimum": self.below_infimum,
            "above_c": self.above_c,
            "above_witness_energy": self.above_energy,
            "above_witness_t": self.above_witness.t if self.above_witness is not None else math.nan,
            "level": self.level,
        }


def critical_mass_check(
    cm: CriticalMass, grid: Grid, gamma2: float, below: float = 0.8, above: float = 1.2, level: float = -10.0
) -> CriticalMassCheck:
    kq = cm.kernels(grid, gamma2)
    lo_c, hi_c = below * cm.value, above * cm.value
    inf_lo = fiber_infimum(cm.scaled_choquard(lo_c), kq)
    wit = fiber_witness(cm.scaled_choquard(hi_c), kq, level)
    return CriticalMassCheck(cm.value, lo_c, inf_lo, hi_c, wit, level)


# --------------------------------------------------------------------------
# subcritical scans
# --------------------------------------------------------------------------


def _m_row(grid: Grid, kernels: KernelSet, params: SolverParams, cm: CriticalMass | None) -> Callable[[float], ScanRow]:
    regime = classify_regime(kernels.gamma1)

    def row(c: float) -> ScanRow:
        if regime == "critical":
            w = cm.scaled_choquard(c)
            kq = cm.kernels(grid, kernels.gamma2)
            wit = fiber_witness(w, kq, UNBOUNDED_LEVEL)
            if wit is not None:
                return ScanRow(c, wit.energy, "unbounded-below", witness=wit)
            return ScanRow(c, fiber_infimum(w, kq), "vanishing")
        res = minimize_global(grid, c, kernels, params)
        if isinstance(res, VanishingVerdict):
            return ScanRow(c, res.m_estimate, "vanishing", state=res)
        return ScanRow(c, res.E, "attained", res.lam, res.breakdown.kinetic, res.extra.get("restarts", 0), state=res)

    return row


def scan_m(
    grid: Grid,
    kernels: KernelSet,
    c_list: Sequence[float],
    params: SolverParams | None = None,
    workers: int | None = None,
    bracket: bool = True,
    on_row: Callable[[ScanRow], None] | None = None,
) -> ScanResult:
    """m(c) rows for the subcritical (or critical) regime.

    Checks: the estimates are nonincreasing in c within MONOTONE_SLACK_M.
    When both verdicts occur, the vanishing/attained transition is bracketed
    by bisection on verdicts.
    """
    params = params or SolverParams()
    regime = classify_regime(kernels.gamma1)
    if regime == "supercritical":
        raise RegimeError("scan_m needs gamma1 <= 2 (m(c) is -infinity in the supercritical regime)")
    cm = critical_mass(grid, params) if regime == "critical" else None
    c_list = [float(c) for c in c_list]
    fn = _m_row(grid, kernels, params, cm)
    rows = _run_rows(fn, c_list, workers, on_row)
    ok = [r for r in sorted(rows, key=lambda r: r.c) if r.verdict in ("attained", "vanishing")]
    vals = [r.value for r in ok]
    checks = {
        "nonincreasing": all(b <= a + MONOTONE_SLACK_M for a, b in zip(vals, vals[1:])),
        "vanishing_abs_max": max([abs(r.value) for r in ok if r.verdict == "vanishing"], default=0.0),
    }
    res = ScanResult(rows, checks)
    if cm is not None:
        res.checks["critical_mass"] = cm.value
    if bracket:
        br = bracket_transition(rows, fn, {"vanishing"}, {"attained", "unbounded-below"})
        if br is not None:
            res.brackets["m_negative"] = br
    # the negativity ratio is homogeneous of degree (g1-g2)/(2-g1) in the
    # mass, so one optimised ratio estimates where it crosses 1
    ratios = [(r.c, r.state.ratio) for r in rows if isinstance(r.state, VanishingVerdict)]
    if ratios and regime == "subcritical":
        q = (kernels.gamma1 - kernels.gamma2) / (2 - kernels.gamma1)
        c_r, ratio = max(ratios)
        res.checks["ratio_threshold_estimate"] = c_r * ratio ** (-1.0 / q)
    return res


def bracket_transition(
    rows: Sequence[ScanRow],
    fn: Callable[[float], ScanRow],
    low_verdicts: set[str],
    high_verdicts: set[str],
    rel_width: float = BRACKET_REL_WIDTH,
    max_iter: int = BRACKET_MAX_ITER,
) -> Bracket | None:
    """Bisect between the largest low-verdict c and the next high-verdict c."""
    ordered = sorted(rows, key=lambda r: r.c)
    pair = None
    for a, b in zip(ordered, ordered[1:]):
        if a.verdict in low_verdicts and b.verdict in high_verdicts:
            pair = (a, b)
    if pair is None:
        return None
    lo, hi = pair
    it = 0
    while (hi.c - lo.c) / hi.c > rel_width and it < max_iter:
        mid = math.sqrt(lo.c * hi.c)
        try:
            r = fn(mid)
        except HartreeError as exc:
            log.info("bisection stopped at c=%g: %s", mid, exc)
            break
        it += 1
        if r.verdict in low_verdicts:
            lo = r
        elif r.verdict in high_verdicts:
            hi = r
        else:
            break
    return Bracket(lo.c, hi.c, lo.verdict, hi.verdict, it)


@dataclass
class WitnessReport:
    c: float
    t0: float
    F_closed: float
    F_direct: float
    E_at_t0: float
    negative: bool
    field: Field
    factorization_error: float  # |E(u_t0) - t0^g2 F_u(t0)/4| / |E(u_t0)|

    @property
    def closed_vs_direct(self) -> float:
        return abs(self.F_closed - self.F_direct) / max(abs(self.F_direct), 1e-300)

    def to_dict(self) -> dict:
        return {
            "c": self.c,
            "t0": self.t0,
            "F_closed": self.F_closed,
            "F_direct": self.F_direct,
            "E_at_t0": self.E_at_t0,
            "negative": self.negative,
        }


def negative_energy_witness(
    grid: Grid, c: float, kernels: KernelSet, choquard_state: GroundState | None = None
) -> WitnessReport:
    """u = sqrt(c) Q_{gamma1}/||Q_{gamma1}||_2 with the closed-form fiber minimiser t0."""
    if classify_regime(kernels.gamma1) != "subcritical":
        raise RegimeError("negative_energy_witness needs the subcritical regime")
    q = choquard_state or solve_choquard(grid, kernels.gamma1)
    t = grid.L / q.field.grid.L if grid.kind == "tensor" else grid.R_max / q.field.grid.R_max
    kq = kernels.rescaled(t)
    u = Field(q.field.grid, q.field.values.real * math.sqrt(c / q.c))
    b = energy(u, kq)
    s = subcritical_scan(b)
    fact = abs(s["E_at_t0"] - s["t0"] ** kernels.gamma2 * s["F_at_t0"] / 4) / max(abs(s["E_at_t0"]), 1e-300)
    return WitnessReport(c, s["t0"], s["F_closed"], s["F_direct"], s["E_at_t0"], s["F_closed"] < 0, u, fact)


@dataclass
class SubadditivityReport:
    c1: float
    c2: float
    m1: float
    m2: float
    m12: float
    holds: bool
    margin: float
    strict: bool | None
    verdicts: tuple[str, str, str]

    def to_dict(self) -> dict:
        return {
            "c1": self.c1,
            "c2": self.c2,
            "m1": self.m1,
            "m2": self.m2,
            "m12": self.m12,
            "holds": self.holds,
            "margin": self.margin,
            "strict": self.strict,
            "verdicts": list(self.verdicts),
        }


def _m_value(grid: Grid, c: float, kernels: KernelSet, params: SolverParams) -> tuple[float, str]:
    res = minimize_global(grid, c, kernels, params)
    if isinstance(res, VanishingVerdict):
        return res.m_estimate, "vanishing"
    return res.E, "attained"


def subadditivity_check(grid: Grid, c1: float, c2: float, kernels: KernelSet, params: SolverParams | None = None) -> SubadditivityReport:
    """m(c1 + c2) <= m(c1) + m(c2) + 1e-6, with the margin reported."""
    params = params or SolverParams()
    if classify_regime(kernels.gamma1) != "subcritical":
        raise RegimeError("subadditivity_check needs the subcritical regime")
    m1, v1 = _m_value(grid, c1, kernels, params)
    m2, v2 = (m1, v1) if c2 == c1 else _m_value(grid, c2, kernels, params)
    m12, v12 = _m_value(grid, c1 + c2, kernels, params)
    margin = m1 + m2 - m12
    strict = margin > 0 if (v1 == v2 == "attained") else None
    return SubadditivityReport(c1, c2, m1, m2, m12, m12 <= m1 + m2 + 1e-6, margin, strict, (v1, v2, v12))


# --------------------------------------------------------------------------
# supercritical scans
# --------------------------------------------------------------------------


def scan_gamma(
    grid: Grid,
    kernels: KernelSet,
    c_list: Sequence[float],
    params: SolverParams | None = None,
    workers: int | None = None,
    critical_mass_value: float | None = None,
    on_row: Callable[[ScanRow], None] | None = None,
) -> ScanResult:
    """Gamma(c) rows (supercritical, or critical above c~1).

    Checks: Gamma > 0 on attained rows; nonincreasing within
    MONOTONE_REL_GAMMA * Gamma; lambda > 0 on the two smallest attained c;
    Gamma(c/4) > 2 Gamma(c) when the two smallest c differ by a factor 4.
    """
    params = params or SolverParams()
    regime = classify_regime(kernels.gamma1)
    if regime == "subcritical":
        raise RegimeError("scan_gamma needs gamma1 >= 2")
    cm_state = None
    if regime == "critical" and critical_mass_value is None:
        cm = critical_mass(grid, params)
        critical_mass_value, cm_state = cm.value, cm.choquard

    def row(c: float) -> ScanRow:
        if regime == "critical":
            gs = minimize_critical(grid, c, kernels, params, critical_mass_value, cm_state)
        else:
            gs = minimize_pohozaev(grid, c, kernels, params)
        return ScanRow(c, gs.E, "attained", gs.lam, gs.breakdown.kinetic, gs.extra.get("restarts", 0), state=gs)

    rows = _run_rows(row, [float(c) for c in c_list], workers, on_row)
    ok = sorted([r for r in rows if r.verdict == "attained"], key=lambda r: r.c)
    vals = [r.value for r in ok]
    checks = {
        "positive": all(v > 0 for v in vals),
        "nonincreasing": all(b <= a + MONOTONE_REL_GAMMA * abs(a) for a, b in zip(vals, vals[1:])),
        "lambda_positive_small_c": all(r.lam > 0 for r in ok[:2]) if len(ok) >= 2 else None,
    }
    if len(ok) >= 2 and abs(ok[1].c / ok[0].c - 4.0) < 1e-9:
        checks["small_c_growth"] = ok[0].value > 2 * ok[1].value
    if critical_mass_value is not None:
        checks["critical_mass"] = critical_mass_value
    lost = [r.c for r in ok if not r.lam > 0]
    if lost:
        checks["lambda_positivity_lost_at"] = min(lost)
    return ScanResult(rows, checks)


@dataclass
class ZeroMassComparison:
    m: float
    c_infinity: float
    rows: list[tuple[float, float, float]]  # (c, Gamma, Gamma/m - 1)
    zero_mass: GroundState

    def to_dict(self) -> dict:
        return {"m": self.m, "c_infinity": self.c_infinity, "rows": self.rows}


def gamma_vs_zero_mass(
    grid: Grid, kernels: KernelSet, factors: Sequence[float] = (1.0, 1.2), params: SolverParams | None = None
) -> ZeroMassComparison:
    """Gamma(c) at multiples of the measured c_infinity against the zero-mass m."""
    zm = solve_zero_mass(grid, kernels, params)
    rows = []
    for f in factors:
        c = f * zm.c
        try:
            gs = minimize_pohozaev(grid, c, kernels, params)
            rows.append((c, gs.E, gs.E / zm.E - 1.0))
        except HartreeError as exc:
            log.info("Gamma(%g) failed: %s", c, exc)
            rows.append((c, math.nan, math.nan))
    return ZeroMassComparison(zm.E, zm.c, rows, zm)


# --------------------------------------------------------------------------
# decay fit
# --------------------------------------------------------------------------


@dataclass
class DecayFit:
    """Far-field fit of a radial profile.

    ``exponent`` is the log-log slope; ``rate`` is the coefficient b of the
    stretched-exponential model log|u| - p log r = a - b r^kappa with the
    fixed prefactor exponent p = -(N-1)/2 + gamma2/4 and kappa = 1 - gamma2/2.
    ``corrected_exponent`` refits the algebraic model with the first
    correction r^{2-gamma2} added (reported, never used for the class).
    """

    cls: str
    exponent: float
    rate: float
    r2_algebraic: float
    r2_stretched: float
    window: tuple[float, float]
    corrected_exponent: float
    points: int

    def to_dict(self) -> dict:
        return {
            "class": self.cls,
            "exponent": self.exponent,
            "rate": self.rate,
            "r2_algebraic": self.r2_algebraic,
            "r2_stretched": self.r2_stretched,
            "window": list(self.window),
            "corrected_exponent": self.corrected_exponent,
            "points": self.points,
        }


def _r_squared(y: np.ndarray, fit: np.ndarray) -> float:
    ss = float(np.sum((y - fit) ** 2))
    tot = float(np.sum((y - y.mean()) ** 2))
    return 1.0 - ss / tot if tot > 0 else 1.0


def decay_fit(u: Field, window: tuple[float, float], gamma2: float) -> DecayFit:
    grid = u.grid
    if grid.kind != "radial":
        raise ConfigError("decay_fit needs a radial field")
    lo, hi = map(float, window)
    r = grid.r
    if not (r[0] <= lo < hi <= grid.R_max):
        raise ConfigError(f"fit window [{lo}, {hi}] must lie inside [{r[0]}, {grid.R_max}]")
    sel = (r >= lo) & (r <= hi)
    y_abs = np.abs(u.values[sel])
    if sel.sum() < 4 or np.any(y_abs <= 0):
        raise ConfigError("fit window needs at least 4 nodes with nonzero samples")
    rr = r[sel]
    y = np.log(y_abs)
    lr = np.log(rr)
    A = np.column_stack([np.ones_like(lr), lr])
    coef_a, *_ = np.linalg.lstsq(A, y, rcond=None)
    r2a = _r_squared(y, A @ coef_a)
    kappa = 1.0 - gamma2 / 2.0
    p = -(grid.N - 1) / 2.0 + gamma2 / 4.0
    ys = y - p * lr
    B = np.column_stack([np.ones_like(rr), rr**kappa])
    coef_s, *_ = np.linalg.lstsq(B, ys, rcond=None)
    r2s = _r_squared(y, B @ coef_s + p * lr)
    C = np.column_stack([np.ones_like(lr), lr, rr ** (2.0 - gamma2)])
    coef_c, *_ = np.linalg.lstsq(C, y, rcond=None)
    cls = "algebraic" if r2a >= r2s else "stretched-exponential"
    return DecayFit(cls, float(coef_a[1]), float(-coef_s[1]), r2a, r2s, (lo, hi), float(coef_c[1]), int(sel.sum()))
