"""Energy, Pohozaev functional, scalings, fiber maps and sharp constants.

Throughout, for a field u and a kernel pair (gamma1 > gamma2):

* kinetic A = ||grad u||^2 and D_gamma = double integral |u(x)|^2|u(y)|^2/|x-y|^gamma,
* E = A/2 + D2/4 - D1/4 and Q = A + (gamma2/4) D2 - (gamma1/4) D1,
* the mass-preserving dilation u_t(x) = t^{N/2} u(tx) gives
  E(u_t) = t^2 A/2 + t^gamma2 D2/4 - t^gamma1 D1/4 and Q(u) = d/dt E(u_t) at t = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ConfigError, DomainError, NumericError, RegimeError, UsageError
from .spectral_core import (
    Field,
    KernelSet,
    RieszKernel,
    interpolate_radial,
    interpolate_tensor,
    tail_mass,
)

CRITICAL_TOL = 1e-12


def classify_regime(gamma1: float) -> str:
    """'subcritical', 'critical' or 'supercritical' by the focusing exponent."""
    if abs(gamma1 - 2.0) <= CRITICAL_TOL:
        return "critical"
    return "subcritical" if gamma1 < 2.0 else "supercritical"


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    d_gamma1: float
    d_gamma2: float
    gamma1: float
    gamma2: float

    @property
    def energy(self) -> float:
        return self.kinetic / 2 + self.d_gamma2 / 4 - self.d_gamma1 / 4

    @property
    def pohozaev(self) -> float:
        return self.kinetic + self.gamma2 / 4 * self.d_gamma2 - self.gamma1 / 4 * self.d_gamma1

    @property
    def scale(self) -> float:
        """Natural magnitude A + D1 + D2 for relative tolerances."""
        return self.kinetic + self.d_gamma1 + self.d_gamma2

    def to_dict(self) -> dict:
        return {
            "kinetic": self.kinetic,
            "d1": self.d_gamma1,
            "d2": self.d_gamma2,
            "E": self.energy,
            "Q": self.pohozaev,
        }

    def scaled(self, t: float) -> "EnergyBreakdown":
        """Breakdown of u_t from the scaling laws."""
        return EnergyBreakdown(
            t * t * self.kinetic,
            t**self.gamma1 * self.d_gamma1,
            t**self.gamma2 * self.d_gamma2,
            self.gamma1,
            self.gamma2,
        )


def _density(u: Field) -> np.ndarray:
    v = u.values
    return (v.real**2 + v.imag**2) if np.iscomplexobj(v) else v * v


def d_gamma(u: Field, kernels: KernelSet | RieszKernel, slot: int = 1) -> float:
    """D_gamma(u) = sum |u|^2 (K_gamma * |u|^2) dx^N."""
    kern = kernels.slot(slot) if isinstance(kernels, KernelSet) else kernels
    if u.grid != kern.grid:
        raise UsageError("field grid does not match the kernel grid")
    rho = _density(u)
    return u.grid.integrate(rho * kern.convolve(rho))


def energy(u: Field, kernels: KernelSet) -> EnergyBreakdown:
    kernels.check_grid(u.grid)
    rho = _density(u)
    if u.grid.kind == "tensor":
        rh = u.grid.rfft(rho)
        v1 = kernels.k1.convolve_hat(rh)
        v2 = kernels.k2.convolve_hat(rh)
    else:
        v1 = kernels.k1.convolve(rho)
        v2 = kernels.k2.convolve(rho)
    return EnergyBreakdown(
        u.grid.kinetic(u.values),
        u.grid.integrate(rho * v1),
        u.grid.integrate(rho * v2),
        kernels.gamma1,
        kernels.gamma2,
    )


# --------------------------------------------------------------------------
# scalings
# --------------------------------------------------------------------------


def _dilate(u: Field, s: float, amplitude: float) -> Field:
    """amplitude * u(s x) on the same grid."""
    g = u.grid
    if s < 1.0:
        reach = s * (g.L if g.kind == "tensor" else g.R_max)
        tail = tail_mass(u, reach)
        total = g.mass(u.values)
        if tail > 1e-8 * total:
            raise DomainError(
                f"dilation by {s} needs the field inside |x|<={reach}; tail mass {tail:.3e} "
                f"exceeds 1e-8 of the mass {total:.3e}"
            )
    if s == 1.0:
        return Field(g, u.values * amplitude)
    if g.kind == "tensor":
        vals = interpolate_tensor(u.values, g, [s * g.axis()] * g.N)
    else:
        vals = interpolate_radial(u.values, g, s * g.r)
    return Field(g, amplitude * vals)


def scale_t(u: Field, t: float) -> Field:
    """u_t(x) = t^{N/2} u(t x) resampled on u's own grid (mass preserving)."""
    if not t > 0:
        raise DomainError(f"scaling parameter must be positive, got t={t}")
    return _dilate(u, t, t ** (u.grid.N / 2))


def scale_mass(u: Field, theta: float, beta: float) -> Field:
    """u_theta(x) = theta^{(1+beta N)/2} u(theta^beta x); multiplies the mass by theta."""
    if not theta > 0:
        raise DomainError(f"mass scaling parameter must be positive, got theta={theta}")
    N = u.grid.N
    return _dilate(u, theta**beta, theta ** ((1 + beta * N) / 2))


def exact_dilation(u: Field, t: float) -> Field:
    """u_t represented without interpolation: same samples on ``grid.rescaled(t)``."""
    return Field(u.grid.rescaled(t), u.values * t ** (u.grid.N / 2))


# --------------------------------------------------------------------------
# fiber map
# --------------------------------------------------------------------------


def fiber_energy(b: EnergyBreakdown, t: float | np.ndarray) -> float | np.ndarray:
    """E(u_t) from the breakdown of u (closed form, no resampling)."""
    t = np.asarray(t, dtype=float)
    val = t**2 * b.kinetic / 2 + t**b.gamma2 * b.d_gamma2 / 4 - t**b.gamma1 * b.d_gamma1 / 4
    return float(val) if val.ndim == 0 else val


def fiber_derivative(b: EnergyBreakdown, t: float | np.ndarray) -> float | np.ndarray:
    """d/dt E(u_t)."""
    t = np.asarray(t, dtype=float)
    g1, g2 = b.gamma1, b.gamma2
    val = t * b.kinetic + g2 / 4 * t ** (g2 - 1) * b.d_gamma2 - g1 / 4 * t ** (g1 - 1) * b.d_gamma1
    return float(val) if val.ndim == 0 else val


def _fiber_sign(b: EnergyBreakdown, t: float) -> float:
    """Sign-equivalent, well-scaled form of d/dt E(u_t): divided by t^{gamma2-1}."""
    g1, g2 = b.gamma1, b.gamma2
    return t ** (2 - g2) * b.kinetic + g2 / 4 * b.d_gamma2 - g1 / 4 * t ** (g1 - g2) * b.d_gamma1


@dataclass(frozen=True)
class PohozaevTime:
    t: float
    regime: str
    energy: float  # E(u_{t_u}) = max over the fiber
    bracket: tuple[float, float]


def pohozaev_time(b: EnergyBreakdown, check: bool = True) -> PohozaevTime:
    """Unique t_u > 0 with Q(u_{t_u}) = 0 (supercritical or critical regime).

    Brackets by geometric expansion from t = 1 inside [1e-6, 1e6], then bisects
    200 times in log t.
    """
    regime = classify_regime(b.gamma1)
    if regime == "subcritical":
        raise RegimeError("pohozaev_time needs gamma1 >= 2 (supercritical or critical regime)")
    if not b.d_gamma1 > 0:
        raise RegimeError("pohozaev_time needs D_gamma1(u) > 0")
    if regime == "critical" and not b.kinetic < b.d_gamma1 / 2:
        raise RegimeError("critical regime: u is outside the set kinetic < D_2/2")
    f = lambda t: _fiber_sign(b, t)
    lo = hi = 1.0
    f1 = f(1.0)
    if f1 > 0:
        while f(hi) > 0:
            hi *= 2.0
            if hi > 1e6:
                raise RegimeError("no sign change of dE(u_t)/dt on [1e-6, 1e6]: outside the admissible cone")
        lo = hi / 2.0
    elif f1 < 0:
        while f(lo) < 0:
            lo /= 2.0
            if lo < 1e-6:
                raise RegimeError("no sign change of dE(u_t)/dt on [1e-6, 1e6]: outside the admissible cone")
        hi = lo * 2.0
    else:
        lo = hi = 1.0
    a, c = math.log(lo), math.log(hi)
    for _ in range(200):
        if c - a <= 0:
            break
        m = 0.5 * (a + c)
        if f(math.exp(m)) > 0:
            a = m
        else:
            c = m
    t = math.exp(0.5 * (a + c))
    if check:
        if b.pohozaev <= 0 and t > 1.0 + 1e-12:
            raise NumericError(f"fiber root t_u={t} > 1 although Q(u) <= 0")
        ts = t * np.linspace(1.0, 10.0, 64)
        e = fiber_energy(b, ts)
        second = e[2:] - 2 * e[1:-1] + e[:-2]
        if np.any(second > 1e-9 * np.max(np.abs(e))):
            raise NumericError("fiber energy not concave beyond t_u")
    return PohozaevTime(t, regime, fiber_energy(b, t), (math.exp(a), math.exp(c)))


def fiber_minimum(b: EnergyBreakdown) -> tuple[float, float] | None:
    """Subcritical fiber: interior local minimiser (t*, E(u_t*)), or None.

    For 0 < gamma2 < gamma1 < 2 the derivative, divided by t^{gamma2-1}, is
    h(t) = t^{2-g2}A + g2 D2/4 - (g1/4) t^{g1-g2} D1, which has a single interior
    minimum; the fiber has an interior local minimum only if h dips below 0.
    """
    g1, g2 = b.gamma1, b.gamma2
    A, B1 = b.kinetic, b.d_gamma1
    if not (A > 0 and B1 > 0):
        return None
    # argmin of h: (2-g2) A t^{1-g2} = (g1/4)(g1-g2) B1 t^{g1-g2-1}
    th = ((g1 * (g1 - g2) * B1) / (4 * (2 - g2) * A)) ** (1.0 / (2 - g1))
    h = lambda t: _fiber_sign(b, t)
    if h(th) >= 0:
        return None
    lo, hi = th, th * 2.0
    while h(hi) < 0:
        hi *= 2.0
    a, c = math.log(lo), math.log(hi)
    for _ in range(200):
        m = 0.5 * (a + c)
        if h(math.exp(m)) < 0:
            a = m
        else:
            c = m
    t = math.exp(0.5 * (a + c))
    return t, fiber_energy(b, t)


# --------------------------------------------------------------------------
# Euler-Lagrange residual and multiplier
# --------------------------------------------------------------------------


def potentials(u: Field, kernels: KernelSet) -> tuple[np.ndarray, np.ndarray]:
    rho = _density(u)
    if u.grid.kind == "tensor":
        rh = u.grid.rfft(rho)
        return kernels.k1.convolve_hat(rh), kernels.k2.convolve_hat(rh)
    return kernels.k1.convolve(rho), kernels.k2.convolve(rho)


def el_residual(u: Field, lam: float, kernels: KernelSet) -> Field:
    """-Lap u + lam u - (K1*|u|^2) u + (K2*|u|^2) u."""
    kernels.check_grid(u.grid)
    v1, v2 = potentials(u, kernels)
    mg = u.grid.mass_gradient(u.values)
    vals = u.grid.neg_laplacian(u.values) + lam * mg - v1 * u.values + v2 * u.values
    return Field(u.grid, vals)


def choquard_residual(u: Field, lam: float, kernel: RieszKernel) -> Field:
    """-Lap u + lam u - (K*|u|^2) u for the single-kernel equation."""
    rho = _density(u)
    mg = u.grid.mass_gradient(u.values)
    vals = u.grid.neg_laplacian(u.values) + lam * mg - kernel.convolve(rho) * u.values
    return Field(u.grid, vals)


def multiplier(u: Field, c: float, kernels: KernelSet, b: EnergyBreakdown | None = None) -> float:
    """lambda = (D1 - D2 - kinetic)/c."""
    if not c > 0:
        raise DomainError(f"mass must be positive, got c={c}")
    m = u.grid.mass(u.values)
    if abs(m - c) > 1e-6 * c:
        raise DomainError(f"field mass {m} differs from c={c} by more than 1e-6 relative")
    b = b if b is not None else energy(u, kernels)
    return (b.d_gamma1 - b.d_gamma2 - b.kinetic) / c


def residual_norm(u: Field, lam: float, kernels: KernelSet) -> float:
    """||EL residual||_2 / ||u||_{H^1} (residual measured on the grid nodes)."""
    r = el_residual(u, lam, kernels)
    denom = math.sqrt(u.grid.mass(u.values) + u.grid.kinetic(u.values))
    return math.sqrt(r.grid.inner(r.values, r.values)) / denom if denom > 0 else 0.0


def in_critical_region(u: Field, kernels: KernelSet) -> bool:
    """kinetic(u) < D_2(u)/2 (strict); kernels must have gamma1 = 2."""
    if classify_regime(kernels.gamma1) != "critical":
        raise ConfigError("in_critical_region needs the focusing exponent gamma1 = 2")
    return u.grid.kinetic(u.values) < d_gamma(u, kernels, 1) / 2


# --------------------------------------------------------------------------
# sharp constants
# --------------------------------------------------------------------------


def gn_constant_choquard(N: int, gamma: float, mass_of_Q: float) -> float:
    """Sharp constant in D_gamma <= C ||grad u||^gamma ||u||^{4-gamma}."""
    if not (0 < gamma < min(N, 4)):
        raise ConfigError(f"gamma={gamma} requires 0<gamma<min{{N,4}}")
    if not mass_of_Q > 0:
        raise ConfigError("ground-state mass must be positive")
    return ((4 - gamma) / gamma) ** (gamma / 2) * 4.0 / ((4 - gamma) * mass_of_Q)


def gn_constant_power(N: int, p: float, mass_of_R: float) -> float:
    """Sharp local Gagliardo-Nirenberg constant from ||R||_2^2 (supplied)."""
    if not mass_of_R > 0:
        raise ConfigError("ground-state mass must be positive")
    upper = math.inf if N <= 2 else 2 * N / (N - 2)
    if not (2 < p < upper):
        raise ConfigError(f"p={p} requires 2<p<2N/(N-2) (N={N})")
    s = 2 * p - (p - 2) * N
    return (s / ((p - 2) * N)) ** (N * (p - 2) / 4) * 2 * p / (s * mass_of_R ** ((p - 2) / 2))


@dataclass(frozen=True)
class SharpConstants:
    N: int
    gamma: float
    mass_of_Q: float

    @property
    def gn_choquard(self) -> float:
        return gn_constant_choquard(self.N, self.gamma, self.mass_of_Q)

    def gn_power(self, p: float, mass_of_R: float) -> float:
        return gn_constant_power(self.N, p, mass_of_R)


def gn_quotient(u: Field, kernel: RieszKernel) -> float:
    """D_gamma / (kinetic^{gamma/2} mass^{(4-gamma)/2})."""
    g = kernel.gamma
    A = u.grid.kinetic(u.values)
    M = u.grid.mass(u.values)
    D = d_gamma(u, kernel)
    return D / (A ** (g / 2) * M ** ((4 - g) / 2))


# --------------------------------------------------------------------------
# subcritical negative-energy test
# --------------------------------------------------------------------------


def subcritical_constant(gamma1: float, gamma2: float) -> float:
    """C with min_t F_u(t) = D2 - C D1^{(2-g2)/(2-g1)} / A^{(g1-g2)/(2-g1)},
    where F_u(t) = 2 t^{2-g2} A + D2 - t^{g1-g2} D1."""
    k = (gamma1 - gamma2) / (2 * (2 - gamma2))
    return (2 - gamma1) / (2 - gamma2) * k ** ((gamma1 - gamma2) / (2 - gamma1))


def subcritical_scan(b: EnergyBreakdown) -> dict:
    """Minimiser t0 of F_u and F_u(t0), closed form and by direct minimisation."""
    g1, g2 = b.gamma1, b.gamma2
    A, B1, B2 = b.kinetic, b.d_gamma1, b.d_gamma2
    F = lambda t: 2 * t ** (2 - g2) * A + B2 - t ** (g1 - g2) * B1
    t0 = ((g1 - g2) * B1 / (2 * (2 - g2) * A)) ** (1 / (2 - g1))
    closed = B2 - subcritical_constant(g1, g2) * B1 ** ((2 - g2) / (2 - g1)) / A ** ((g1 - g2) / (2 - g1))
    s0 = math.log(t0)
    res = minimize_scalar(
        lambda s: F(math.exp(s)), bounds=(s0 - 20, s0 + 20), method="bounded",
        options={"xatol": 1e-12, "maxiter": 2000},
    )
    return {
        "t0": t0,
        "F_closed": closed,
        "F_direct": float(res.fun),
        "t_direct": math.exp(res.x),
        "F_at_t0": F(t0),
        "E_at_t0": fiber_energy(b, t0),
    }


def negativity_ratio(b: EnergyBreakdown) -> float:
    """C D1^p / (A^q D2): exceeds 1 exactly when the fiber of u reaches E < 0."""
    g1, g2 = b.gamma1, b.gamma2
    p = (2 - g2) / (2 - g1)
    q = (g1 - g2) / (2 - g1)
    return subcritical_constant(g1, g2) * b.d_gamma1**p / (b.kinetic**q * b.d_gamma2)
