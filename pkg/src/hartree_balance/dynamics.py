"""Time integration and trajectory diagnostics.

The evolution equation is

    i psi_t = Lap psi + (K1 * |psi|^2) psi - (K2 * |psi|^2) psi,

so a stationary solution u with multiplier lambda evolves as
``exp(-i lambda t) u``. It is integrated by Strang splitting: the nonlinear
substep is the pointwise phase rotation ``psi * exp(i h W)`` with the real
potential ``W = K2 * |psi|^2 - K1 * |psi|^2`` (|psi| is unchanged by it, so W
is exact over the substep) and the linear substep is the Fourier-space
rotation ``psi_hat * exp(i h |k|^2)``. Both conserve mass to roundoff.

The energy is conserved and equals ``kinetic/2 + (1/4) sum |psi|^2 W``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .errors import ConfigError, IntegrationError, UsageError
from .functionals import energy
from .reporting import write_csv
from .spectral_core import Field, GridSpec, KernelSet, tail_mass

log = logging.getLogger(__name__)

ENERGY_JUMP_TOL = 1e-4
MASS_DRIFT_TOL = 1e-6
MAX_HALVINGS = 30
BLOWUP_HALVINGS = 20
BLOWUP_H1_FACTOR = 1e6
TRAJECTORY_COLUMNS = ("t", "mass", "energy", "kinetic", "Va", "Va1", "Va2", "K", "tail", "dt")


# --------------------------------------------------------------------------
# trajectory records
# --------------------------------------------------------------------------


@dataclass
class TrajectorySample:
    t: float
    mass: float
    energy: float
    kinetic: float
    V_a: float
    V_a_prime: float
    V_a_dprime: float
    K: float
    tail_mass: float
    dt_current: float

    def row(self) -> tuple[float, ...]:
        return (
            self.t,
            self.mass,
            self.energy,
            self.kinetic,
            self.V_a,
            self.V_a_prime,
            self.V_a_dprime,
            self.K,
            self.tail_mass,
            self.dt_current,
        )


@dataclass
class Trajectory:
    """Samples of one run plus the final field and step-control history.

    Attributes:
        samples: one record per monitor step (and at t = 0 and at the end).
        final: field at the last accepted step.
        halvings: total number of step-size halvings.
        stop_reason: None for a completed run, "step-collapse" when the step
            shrank past the halving cap, "h1-growth" when the H^1 norm grew
            by BLOWUP_H1_FACTOR.
        fields: snapshots at the sample times when requested.
        steps: accepted steps.
        h1_initial: H^1 norm of the initial field.
    """

    samples: list[TrajectorySample]
    final: Field
    halvings: int = 0
    stop_reason: str | None = None
    fields: list[Field] = field(default_factory=list, repr=False)
    steps: int = 0
    h1_initial: float = 0.0

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    def column(self, name: str) -> np.ndarray:
        idx = TRAJECTORY_COLUMNS.index(name)
        return np.array([s.row()[idx] for s in self.samples])


# --------------------------------------------------------------------------
# virial weight
# --------------------------------------------------------------------------

# quintic smoothstep S(s) = 10 s^3 - 15 s^4 + 6 s^5 and its antiderivatives
_S = Polynomial([0, 0, 0, 10, -15, 6])


@dataclass(frozen=True)
class VirialWeight:
    """Radial C^4 weight: a = r^2 on [0, 2R], a'' = 0 on [4R, inf).

    On the joining panel s = (r - 2R)/(2R) in [0, 1] the second derivative
    is ``a'' = 2 (1 - S(s))`` with the quintic smoothstep S, so a'' and its
    first two derivatives are continuous; a' and a follow by exact
    integration. ``pieces`` holds the polynomial coefficient table of a'' on
    each panel, in the panel variable.
    """

    R: float

    def __post_init__(self):
        if not (self.R > 0 and math.isfinite(self.R)):
            raise ConfigError(f"virial radius must be positive, got R={self.R}")

    @property
    def pieces(self) -> list[tuple[float, float, np.ndarray]]:
        """(start, end, coefficients of a'' in s) for the three panels."""
        R = self.R
        return [
            (0.0, 2 * R, np.array([2.0])),
            (2 * R, 4 * R, (2.0 - 2.0 * _S).coef),
            (4 * R, math.inf, np.array([0.0])),
        ]

    def derivatives(self, r: np.ndarray) -> tuple[np.ndarray, ...]:
        """(a, a', a'', a''', a'''') at radii r."""
        R = self.R
        r = np.asarray(r, dtype=float)
        s = np.clip((r - 2 * R) / (2 * R), 0.0, 1.0)
        S1 = _S.integ()
        S2 = S1.integ()
        dS = _S.deriv()
        d2S = dS.deriv()
        inner = r <= 2 * R
        outer = r >= 4 * R
        a2 = np.where(inner, 2.0, 2.0 - 2.0 * _S(s))
        a1 = np.where(inner, 2 * r, 2 * r - 4 * R * S1(s))
        a0 = np.where(inner, r * r, r * r - 8 * R * R * S2(s))
        a3 = np.where(inner, 0.0, -dS(s) / R)
        a4 = np.where(inner, 0.0, -d2S(s) / (2 * R * R))
        # beyond 4R the weight is affine in r
        a1_out = 8 * R - 4 * R * S1(1.0)
        a0_out = 16 * R * R - 8 * R * R * S2(1.0)
        a0 = np.where(outer, a0_out + a1_out * (r - 4 * R), a0)
        a1 = np.where(outer, a1_out, a1)
        a2 = np.where(outer, 0.0, a2)
        a3 = np.where(outer, 0.0, a3)
        a4 = np.where(outer, 0.0, a4)
        return a0, a1, a2, a3, a4

    def bilaplacian(self, r: np.ndarray, N: int) -> np.ndarray:
        """Delta^2 a for the radial profile in R^N (zero on the inner panel)."""
        r = np.asarray(r, dtype=float)
        _, a1, a2, a3, a4 = self.derivatives(r)
        out = np.zeros_like(r)
        m = r > 2 * self.R
        rr = r[m]
        g1 = a3[m] + (N - 1) * (a2[m] / rr - a1[m] / rr**2)
        g2 = a4[m] + (N - 1) * (a3[m] / rr - 2 * a2[m] / rr**2 + 2 * a1[m] / rr**3)
        out[m] = g2 + (N - 1) * g1 / rr
        return out


def virial_weight(R: float) -> VirialWeight:
    return VirialWeight(float(R))


def _check_weight(grid: GridSpec, weight: VirialWeight) -> None:
    if grid.kind != "tensor":
        raise UsageError("virial diagnostics need a tensor grid")
    if not 4 * weight.R < grid.L:
        raise ConfigError(f"virial weight support 4R={4 * weight.R} must lie inside the box (L={grid.L})")


# --------------------------------------------------------------------------
# functionals along the flow
# --------------------------------------------------------------------------


def k_functional(u: Field, kernels: KernelSet, convention: str = "validated") -> float:
    """Virial functional with V_a'' = 16 K for a = |x|^2.

    ``validated`` is kinetic/2 - (gamma1/8) D1 + (gamma2/8) D2 (= Q/2), the
    pairing confirmed by the finite-difference check of V_a. ``flipped`` is
    kinetic/2 + (gamma1/8) D1 - (gamma2/8) D2.
    """
    b = energy(u, kernels)
    g1, g2 = kernels.gamma1, kernels.gamma2
    if convention == "validated":
        return b.kinetic / 2 - g1 / 8 * b.d_gamma1 + g2 / 8 * b.d_gamma2
    if convention == "flipped":
        return b.kinetic / 2 + g1 / 8 * b.d_gamma1 - g2 / 8 * b.d_gamma2
    raise ConfigError(f"unknown K convention {convention!r}; use 'validated' or 'flipped'")


def _radial_unit(grid: GridSpec) -> tuple[np.ndarray, list[np.ndarray]]:
    r = grid.radius
    safe = np.where(r > 0, r, 1.0)
    return r, [x / safe for x in grid.coords()]


def virial_terms(u: Field, kernels: KernelSet, weight: VirialWeight) -> tuple[float, float, float]:
    """(V_a, V_a', V_a'') for one field under this module's time convention.

    V_a'' = 4 Re sum a_jk conj(d_j u) d_k u - sum (Delta^2 a)|u|^2
            + 2 sum |u|^2 grad a . grad(K1 * |u|^2)
            - 2 sum |u|^2 grad a . grad(K2 * |u|^2).
    The two double-integral terms are evaluated exactly for the discrete
    convolution by differentiating the potentials spectrally.
    """
    grid = u.grid
    _check_weight(grid, weight)
    kernels.check_grid(grid)
    psi = np.asarray(u.values, dtype=complex)
    rho = psi.real**2 + psi.imag**2
    r, xhat = _radial_unit(grid)
    a0, a1, a2, _, _ = weight.derivatives(r)
    V = grid.integrate(a0 * rho)
    grads = grid.gradient(psi)
    radial_d = sum(xh * g for xh, g in zip(xhat, grads))
    # time derivative of sum a|psi|^2 for i psi_t = Lap psi + ...
    Vp = -2.0 * grid.integrate((np.conj(psi) * a1 * radial_d).imag)
    # Hessian of a radial weight: a'' xhat xhat^T + (a'/r)(I - xhat xhat^T)
    a1_over_r = np.where(r > 0, a1 / np.where(r > 0, r, 1.0), a2)
    grad_sq = sum(g.real**2 + g.imag**2 for g in grads)
    rad_sq = radial_d.real**2 + radial_d.imag**2
    hess = a2 * rad_sq + a1_over_r * (grad_sq - rad_sq)
    Vpp = 4.0 * grid.integrate(hess) - grid.integrate(weight.bilaplacian(r, grid.N) * rho)
    rh = grid.rfft(rho)
    grad_a = [a1 * xh for xh in xhat]
    for sign, kern in ((2.0, kernels.k1), (-2.0, kernels.k2)):
        ph = kern.data * rh
        term = 0.0
        for axis, ga in enumerate(grad_a):
            dpot = grid.irfft(1j * grid.kvec(axis, half=True) * ph)
            term += grid.integrate(rho * ga * dpot)
        Vpp += sign * term
    return V, Vp, Vpp


def virial_series(fields: Sequence[Field], kernels: KernelSet, weight: VirialWeight) -> list[tuple[float, float, float]]:
    return [virial_terms(u, kernels, weight) for u in fields]


def mass_tail(u: Field, R: float) -> float:
    """Mass outside radius R (R must lie inside the box)."""
    if u.grid.kind == "tensor" and not R < u.grid.L:
        raise ConfigError(f"tail radius R={R} must be smaller than L={u.grid.L}")
    if R < 0:
        raise ConfigError("tail radius must be non-negative")
    return tail_mass(u, R)


# --------------------------------------------------------------------------
# integrator
# --------------------------------------------------------------------------


class _Stepper:
    """Strang splitting on one grid; caches the nonlinear potential."""

    def __init__(self, grid: GridSpec, kernels: KernelSet | None):
        self.grid = grid
        self.kernels = kernels
        self.kdiff = None if kernels is None else kernels.k2.data - kernels.k1.data

    def potential(self, psi: np.ndarray) -> np.ndarray:
        if self.kdiff is None:
            return np.zeros(self.grid.shape)
        rho = psi.real**2 + psi.imag**2
        return self.grid.irfft(self.kdiff * self.grid.rfft(rho))

    def energy(self, psi: np.ndarray, W: np.ndarray) -> tuple[float, float, float]:
        """(energy, kinetic, energy scale) using the potential W of psi."""
        kin = self.grid.kinetic(psi)
        rho = psi.real**2 + psi.imag**2
        pot = self.grid.integrate(rho * W) / 4
        if self.kdiff is None:
            return kin / 2, kin, kin / 2
        # |W|-weighted scale keeps the relative test meaningful when E ~ 0
        scale = kin / 2 + self.grid.integrate(rho * np.abs(W)) / 4
        return kin / 2 + pot, kin, scale

    def step(self, psi: np.ndarray, W: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
        psi = psi * np.exp(0.5j * dt * W)
        psi = self.grid.ifft(self.grid.fft(psi) * np.exp(1j * dt * self.grid.k2))
        W = self.potential(psi)
        psi = psi * np.exp(0.5j * dt * W)
        return psi, W


def free_propagate(u: Field, t: float) -> Field:
    """Apply the free propagator U(t): psi_hat -> psi_hat exp(i t |k|^2)."""
    grid = u.grid
    if grid.kind != "tensor":
        raise UsageError("free propagation needs a tensor grid")
    psi = np.asarray(u.values, dtype=complex)
    return Field(grid, grid.ifft(grid.fft(psi) * np.exp(1j * t * grid.k2)))


def evolve(
    psi0: Field,
    kernels: KernelSet | None,
    T: float,
    dt: float,
    monitor_every: int = 10,
    adaptive: bool = True,
    weight: VirialWeight | None = None,
    tail_radius: float | None = None,
    keep_fields: bool = False,
    on_sample=None,
) -> Trajectory:
    """Integrate from psi0 up to time T.

    Args:
        psi0: initial field on a tensor grid.
        kernels: kernel pair on the same grid; None runs the free equation.
        T: horizon.
        dt: initial (and, without adaptation, fixed) step.
        monitor_every: accepted steps between samples.
        adaptive: halve the step when the relative energy jump of a step
            exceeds ENERGY_JUMP_TOL. Repeated halving past MAX_HALVINGS
            ends the run with stop_reason "step-collapse".
        weight: virial weight for the V_a columns (NaN when None).
        tail_radius: radius for the tail-mass column (NaN when None).
        keep_fields: store a snapshot at every sample.
        on_sample: optional callback receiving each TrajectorySample.

    Raises:
        IntegrationError: non-finite values or relative mass drift above
            MASS_DRIFT_TOL.
    """
    grid = psi0.grid
    if grid.kind != "tensor":
        raise UsageError("evolve needs a tensor grid")
    if kernels is not None:
        kernels.check_grid(grid)
    if not (dt > 0 and T >= 0 and monitor_every >= 1):
        raise ConfigError("evolve needs dt > 0, T >= 0 and monitor_every >= 1")
    if weight is not None:
        _check_weight(grid, weight)
    if tail_radius is not None and not tail_radius < grid.L:
        raise ConfigError(f"tail radius {tail_radius} must be smaller than L={grid.L}")

    stepper = _Stepper(grid, kernels)
    psi = np.asarray(psi0.values, dtype=complex).copy()
    W = stepper.potential(psi)
    mass0 = grid.mass(psi)
    if not (math.isfinite(mass0) and mass0 > 0):
        raise IntegrationError("initial field has zero or non-finite mass")
    E, kin, scale = stepper.energy(psi, W)
    h1_0 = math.sqrt(mass0 + kin)
    samples: list[TrajectorySample] = []
    fields: list[Field] = []

    def record(t_now: float, dt_now: float, kin_now: float, E_now: float) -> None:
        u = Field(grid, psi.copy())
        if weight is not None and kernels is not None:
            Va, Va1, Va2 = virial_terms(u, kernels, weight)
        else:
            Va = Va1 = Va2 = math.nan
        Kval = k_functional(u, kernels) if kernels is not None else kin_now / 2
        tail = tail_mass(u, tail_radius) if tail_radius is not None else math.nan
        s = TrajectorySample(t_now, grid.mass(psi), E_now, kin_now, Va, Va1, Va2, Kval, tail, dt_now)
        samples.append(s)
        if keep_fields:
            fields.append(u)
        if on_sample is not None:
            on_sample(s)

    record(0.0, dt, kin, E)
    t = 0.0
    step_dt = dt
    halvings = 0
    steps = 0
    stop_reason = None
    since_sample = 0
    while t < T * (1 - 1e-14):
        h = min(step_dt, T - t)
        while True:
            new, Wn = stepper.step(psi, W, h)
            En, kinn, scalen = stepper.energy(new, Wn)
            finite = math.isfinite(En) and math.isfinite(kinn)
            jump = abs(En - E) / max(scale, scalen, 1e-300) if finite else math.inf
            if not adaptive or jump <= ENERGY_JUMP_TOL:
                break
            if halvings >= MAX_HALVINGS:
                stop_reason = "step-collapse"
                break
            halvings += 1
            step_dt *= 0.5
            h = min(step_dt, T - t)
        if stop_reason is not None:
            break
        if not np.all(np.isfinite(new)):
            raise IntegrationError(f"non-finite field at t={t + h:.6g}")
        m = grid.mass(new)
        if abs(m - mass0) > MASS_DRIFT_TOL * mass0:
            raise IntegrationError(f"relative mass drift {abs(m - mass0) / mass0:.3e} at t={t + h:.6g}")
        psi, W, E, kin, scale = new, Wn, En, kinn, scalen
        t += h
        steps += 1
        since_sample += 1
        if math.sqrt(m + kin) > BLOWUP_H1_FACTOR * h1_0:
            stop_reason = "h1-growth"
            record(t, h, kin, E)
            break
        if since_sample >= monitor_every:
            record(t, h, kin, E)
            since_sample = 0
    if since_sample > 0 or stop_reason == "step-collapse":
        if not samples or samples[-1].t != t:
            record(t, step_dt, kin, E)
    log.debug("evolve: %d steps, %d halvings, stop=%s", steps, halvings, stop_reason)
    return Trajectory(samples, Field(grid, psi), halvings, stop_reason, fields, steps, h1_0)


# --------------------------------------------------------------------------
# verdicts and diagnostics
# --------------------------------------------------------------------------


@dataclass
class BlowupVerdict:
    verdict: str  # stable | suspected | blow-up
    growth: float
    halvings: int
    h1_ratio: float
    time: float | None  # first sample time at which the growth criterion held


def blowup_monitor(traj: Trajectory, grad_growth_factor: float = 10.0, window: int | None = None) -> BlowupVerdict:
    """Classify a trajectory from its gradient growth and step control.

    Blow-up: the gradient norm grew by grad_growth_factor from its running
    minimum and the step was halved at least BLOWUP_HALVINGS times, or the
    H^1 norm exceeded BLOWUP_H1_FACTOR times its initial value. Suspected:
    exactly one of the first two conditions. ``window`` restricts the scan
    to the last ``window`` samples.
    """
    if not traj.samples:
        raise ConfigError("blowup_monitor needs a nonempty trajectory")
    samples = traj.samples if window is None else traj.samples[-window:]
    grad = np.sqrt(np.maximum([s.kinetic for s in samples], 0.0))
    running_min = np.minimum.accumulate(grad)
    ratio = np.where(running_min > 0, grad / np.where(running_min > 0, running_min, 1.0), 1.0)
    growth = float(np.max(ratio))
    hit = np.nonzero(ratio >= grad_growth_factor)[0]
    t_hit = float(samples[hit[0]].t) if hit.size else None
    last = samples[-1]
    h1_ratio = math.sqrt(last.mass + last.kinetic) / traj.h1_initial if traj.h1_initial > 0 else 1.0
    grew = growth >= grad_growth_factor
    collapsed = traj.halvings >= BLOWUP_HALVINGS
    if (grew and collapsed) or h1_ratio > BLOWUP_H1_FACTOR or traj.stop_reason == "h1-growth":
        verdict = "blow-up"
    elif grew or collapsed:
        verdict = "suspected"
    else:
        verdict = "stable"
    return BlowupVerdict(verdict, growth, traj.halvings, h1_ratio, t_hit)


def scattering_diagnostic(fields: Sequence[Field], times: Sequence[float], s: float = 1.0) -> np.ndarray:
    """Increments ||U(-t_{j+1}) psi_{j+1} - U(-t_j) psi_j||_{H^s}."""
    if len(fields) != len(times):
        raise UsageError("fields and times must have the same length")
    pulled = [free_propagate(u, -t).values for u, t in zip(fields, times)]
    out = []
    for a, b in zip(pulled, pulled[1:]):
        diff = b - a
        out.append(math.sqrt(max(fields[0].grid.sobolev_sq(diff, s), 0.0)))
    return np.array(out)


def global_kinetic_bound(E0: float, mass: float, gamma1: float, gn_constant: float) -> float:
    """Bound on the kinetic energy along a subcritical trajectory.

    For 0 < gamma2 < gamma1 < 2, dropping the defocusing term and applying
    D1 <= C A^{gamma1/2} c^{(4-gamma1)/2} to E0 = E(psi(t)) gives
    A/2 - (C/4) c^{(4-gamma1)/2} A^{gamma1/2} <= E0; the largest root of the
    equality bounds A(t) for all t.
    """
    if not (0 < gamma1 < 2):
        raise ConfigError("the global kinetic bound needs 0 < gamma2 < gamma1 < 2")
    coef = gn_constant / 4 * mass ** ((4 - gamma1) / 2)

    def f(A: float) -> float:
        return A / 2 - coef * A ** (gamma1 / 2) - E0

    p = gamma1 / 2
    # f is convex with its minimum at lo; the sublevel set is [., root]
    lo = (2 * coef * p) ** (1 / (1 - p))
    if f(lo) > 0:
        raise ConfigError("energy below the Gagliardo-Nirenberg floor; check the constant")
    hi = max(2 * lo, 1.0, 2 * abs(E0))
    while f(hi) <= 0:
        hi *= 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) <= 0:
            lo = mid
        else:
            hi = mid
    return hi


def check_global_bound(traj: Trajectory, bound: float) -> bool:
    return all(s.kinetic <= bound * (1 + 1e-9) for s in traj.samples)


def energy_drift_constant(drifts: Sequence[float], dts: Sequence[float]) -> float:
    """Least-squares C in |E(T) - E(0)| = C dt^2."""
    d = np.abs(np.asarray(drifts, dtype=float))
    h2 = np.asarray(dts, dtype=float) ** 2
    return float(np.dot(d, h2) / np.dot(h2, h2))


def write_trajectory_csv(path, traj: Trajectory, header_comment: str | None = None) -> None:
    write_csv(path, TRAJECTORY_COLUMNS, [s.row() for s in traj.samples], header_comment)


def second_difference(times: Sequence[float], values: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Three-point second derivative at the interior sample times (nonuniform spacing allowed)."""
    t = np.asarray(times, dtype=float)
    f = np.asarray(values, dtype=float)
    if t.size < 3:
        raise ConfigError("second differences need at least three samples")
    hm = t[1:-1] - t[:-2]
    hp = t[2:] - t[1:-1]
    d2 = 2.0 * ((f[2:] - f[1:-1]) / hp - (f[1:-1] - f[:-2]) / hm) / (hp + hm)
    return t[1:-1], d2


@dataclass
class VirialCheck:
    """Consistency of the virial columns of one trajectory.

    ``fd_rel_error``: max |FD2[V_a] - V_a''| over interior samples, relative
    to max |V_a''|. ``k_rel_error``: |V_a'' - 16 K| / |16 K| at t = 0, which
    vanishes when the initial field lives where a = |x|^2.
    """

    fd_rel_error: float
    k_rel_error: float
    convention: str = "validated"

    def to_dict(self) -> dict:
        return {"fd_rel_error": self.fd_rel_error, "k_rel_error": self.k_rel_error, "convention": self.convention}


def virial_check(traj: Trajectory) -> VirialCheck:
    Va = traj.column("Va")
    Va2 = traj.column("Va2")
    if not np.all(np.isfinite(Va)):
        raise ConfigError("trajectory has no virial columns; run it with a virial weight")
    _, fd = second_difference(traj.times, Va)
    exact = Va2[1:-1]
    fd_err = float(np.max(np.abs(fd - exact)) / max(np.max(np.abs(exact)), 1e-300))
    K0 = traj.samples[0].K
    k_err = abs(Va2[0] - 16 * K0) / max(abs(16 * K0), 1e-300)
    return VirialCheck(fd_err, float(k_err))
