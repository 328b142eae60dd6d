"""Grids, fields, Riesz-potential convolution and norms.

Two discretizations share one duck-typed interface:

* ``GridSpec``: periodic tensor grid on ``[-L, L)^N`` with Fourier differentiation.
* ``RadialGridSpec``: cell-centred finite-volume grid on ``(0, R_max)`` for radial
  fields in any dimension ``N >= 3``.

Both provide ``integrate``, ``inner``, ``mass``, ``kinetic``, ``neg_laplacian``,
``precondition`` and ``rescaled``. ``rescaled(t)`` returns the grid on which the
*same sample array* represents the dilation ``u_t(x) = t^{N/2} u(t x)`` once the
samples are multiplied by ``t^{N/2}``; kernels rescale exactly as well, so every
discrete functional obeys the continuous scaling laws to rounding error.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.fft as sfft
from scipy import integrate as sint
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded
from scipy.special import hyp2f1, j0, roots_jacobi, roots_legendre

from .errors import ConfigError, DomainError, NumericError, UnsupportedError, UsageError

MAX_NODES = 2**27
# Radial face grading; sinh-spaced faces resolve a compact core and an
# algebraic tail on the same grid.
DEFAULT_STRETCH = 8.0


def fft_workers() -> int:
    """Worker count for transforms; ``HB_THREADS`` overrides the CPU count."""
    env = os.environ.get("HB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def sphere_area(N: int) -> float:
    """Surface area of the unit sphere in R^N (2 for N = 1)."""
    return 2.0 * math.pi ** (N / 2) / math.gamma(N / 2)


# --------------------------------------------------------------------------
# tensor grid
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GridSpec:
    """Periodic tensor grid on [-L, L)^N with n samples per axis."""

    N: int
    L: float
    n: int

    kind = "tensor"

    def __post_init__(self):
        problems = []
        if self.N not in (1, 2, 3):
            problems.append(f"tensor grids support N in {{1,2,3}}, got N={self.N}")
        if not (self.L > 0 and math.isfinite(self.L)):
            problems.append(f"box half-width must be positive, got L={self.L}")
        if self.n < 8 or self.n % 2:
            problems.append(f"samples per axis must be even and >= 8, got n={self.n}")
        if not problems and self.n**self.N > MAX_NODES:
            problems.append(f"grid of {self.n}^{self.N} nodes exceeds the {MAX_NODES} node limit")
        if problems:
            raise ConfigError(problems)

    def __eq__(self, other):
        return (
            isinstance(other, GridSpec)
            and self.N == other.N
            and self.n == other.n
            and self.L == other.L
        )

    def __hash__(self):
        return hash(("tensor", self.N, self.L, self.n))

    # geometry -------------------------------------------------------------
    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.N

    @property
    def size(self) -> int:
        return self.n**self.N

    @property
    def cell_volume(self) -> float:
        return self.dx**self.N

    @property
    def extent(self) -> float:
        """Half-width (L) used in checkpoint headers."""
        return self.L

    @property
    def count(self) -> int:
        return self.n

    def axis(self) -> np.ndarray:
        return -self.L + self.dx * np.arange(self.n)

    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers pi*m/L in FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    def coords(self) -> list[np.ndarray]:
        """Broadcastable coordinate arrays, one per axis."""
        x = self.axis()
        out = []
        for a in range(self.N):
            shp = [1] * self.N
            shp[a] = self.n
            out.append(x.reshape(shp))
        return out

    @cached_property
    def radius(self) -> np.ndarray:
        r2 = np.zeros(self.shape)
        for c in self.coords():
            r2 = r2 + c * c
        return np.sqrt(r2)

    def _kvecs(self, half: bool) -> list[np.ndarray]:
        k = self.wavenumbers()
        out = []
        for a in range(self.N):
            ka = k
            if half and a == self.N - 1:
                ka = 2.0 * np.pi * np.fft.rfftfreq(self.n, d=self.dx)
            shp = [1] * self.N
            shp[a] = ka.size
            out.append(ka.reshape(shp))
        return out

    @cached_property
    def k2(self) -> np.ndarray:
        """|k|^2 on the full (complex FFT) lattice."""
        return sum(k * k for k in self._kvecs(False))

    @cached_property
    def k2_half(self) -> np.ndarray:
        """|k|^2 on the real-FFT half lattice."""
        return sum(k * k for k in self._kvecs(True))

    @cached_property
    def _half_multiplicity(self) -> np.ndarray:
        m = np.full(self.n // 2 + 1, 2.0)
        m[0] = 1.0
        m[-1] = 1.0
        shp = [1] * self.N
        shp[-1] = m.size
        return m.reshape(shp)

    def kvec(self, axis: int, half: bool = False) -> np.ndarray:
        return self._kvecs(half)[axis]

    def rescaled(self, t: float) -> "GridSpec":
        """Grid carrying the dilation u_t when samples are scaled by t^{N/2}."""
        return GridSpec(self.N, self.L / t, self.n)

    # transforms -------------------------------------------------------------
    def fft(self, u: np.ndarray) -> np.ndarray:
        return sfft.fftn(u, workers=fft_workers())

    def ifft(self, uh: np.ndarray) -> np.ndarray:
        return sfft.ifftn(uh, workers=fft_workers())

    def rfft(self, u: np.ndarray) -> np.ndarray:
        return sfft.rfftn(u, workers=fft_workers())

    def irfft(self, uh: np.ndarray) -> np.ndarray:
        return sfft.irfftn(uh, s=self.shape, workers=fft_workers())

    # reductions -------------------------------------------------------------
    def integrate(self, f: np.ndarray) -> float:
        return float(np.sum(f) * self.cell_volume)

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        """Real L^2 inner product Re <u, v>."""
        if np.iscomplexobj(u) or np.iscomplexobj(v):
            return float(np.sum((np.conj(u) * v).real) * self.cell_volume)
        return float(np.sum(u * v) * self.cell_volume)

    def mass(self, u: np.ndarray) -> float:
        return self.integrate(np.abs(u) ** 2) if np.iscomplexobj(u) else self.integrate(u * u)

    def mass_gradient(self, u: np.ndarray) -> np.ndarray:
        """L^2-gradient of the mass is 2u; returned without the factor 2."""
        return u

    def spectral_sum(self, u: np.ndarray, weight_full, weight_half) -> float:
        """sum_k w(k)|u_hat|^2 normalised so that w = 1 gives the mass."""
        norm = self.cell_volume / self.size
        if np.iscomplexobj(u):
            uh = self.fft(u)
            return float(np.sum(weight_full * (uh.real**2 + uh.imag**2)) * norm)
        uh = self.rfft(u)
        return float(
            np.sum(self._half_multiplicity * weight_half * (uh.real**2 + uh.imag**2)) * norm
        )

    def kinetic(self, u: np.ndarray) -> float:
        return self.spectral_sum(u, self.k2, self.k2_half)

    def neg_laplacian(self, u: np.ndarray) -> np.ndarray:
        if np.iscomplexobj(u):
            return self.ifft(self.k2 * self.fft(u))
        return self.irfft(self.k2_half * self.rfft(u))

    def gradient(self, u: np.ndarray) -> list[np.ndarray]:
        uh = self.fft(u)
        out = [self.ifft(1j * k * uh) for k in self._kvecs(False)]
        if not np.iscomplexobj(u):
            out = [g.real for g in out]
        return out

    def precondition(self, g: np.ndarray, shift: float = 1.0) -> np.ndarray:
        """Apply (shift - Laplacian)^{-1}."""
        if np.iscomplexobj(g):
            return self.ifft(self.fft(g) / (shift + self.k2))
        return self.irfft(self.rfft(g) / (shift + self.k2_half))

    def sobolev_sq(self, u: np.ndarray, s: float) -> float:
        return self.spectral_sum(u, (1.0 + self.k2) ** s, (1.0 + self.k2_half) ** s)

    def gaussian(self, sigma: float, center: Sequence[float] | None = None) -> np.ndarray:
        r2 = np.zeros(self.shape)
        center = center if center is not None else [0.0] * self.N
        for c, x0 in zip(self.coords(), center):
            r2 = r2 + (c - x0) ** 2
        return np.exp(-r2 / (2.0 * sigma**2))


# --------------------------------------------------------------------------
# radial grid
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RadialGridSpec:
    """Cell-centred radial grid with exact shell-volume weights.

    Faces are ``R_max sinh(stretch k/M) / sinh(stretch)`` (uniform spacing
    ``k R_max/M`` when ``stretch == 0``), so cells are fine near the origin
    and grow geometrically outward. Node ``r_i`` is the midpoint of its
    shell and its weight is the exact shell volume, so the weights sum to
    the ball volume. The
    kinetic energy is the finite-volume quadratic form built from face
    differences. Beyond ``R_max`` the field is continued as the harmonic
    profile ``u(R) (R/r)^{N-2}`` when ``N >= 5`` (whose Dirichlet energy and
    mass are added in closed form) and by zero otherwise.
    """

    N: int
    M: int
    R_max: float
    stretch: float = DEFAULT_STRETCH

    kind = "radial"

    def __post_init__(self):
        problems = []
        if self.N < 3:
            problems.append(f"radial grids need N >= 3, got N={self.N}")
        if self.M < 8:
            problems.append(f"radial point count must be >= 8, got M={self.M}")
        if not (self.R_max > 0 and math.isfinite(self.R_max)):
            problems.append(f"outer radius must be positive, got R_max={self.R_max}")
        if not (0.0 <= self.stretch <= 30.0):
            problems.append(f"radial stretch must lie in [0, 30], got stretch={self.stretch}")
        if problems:
            raise ConfigError(problems)

    def __eq__(self, other):
        return (
            isinstance(other, RadialGridSpec)
            and self.N == other.N
            and self.M == other.M
            and self.R_max == other.R_max
            and self.stretch == other.stretch
        )

    def __hash__(self):
        return hash(("radial", self.N, self.M, self.R_max, self.stretch))

    @property
    def h(self) -> float:
        """Width of the outermost cell."""
        return float(self.R_max - self.faces[-2])

    @property
    def shape(self) -> tuple[int]:
        return (self.M,)

    @property
    def size(self) -> int:
        return self.M

    @property
    def extent(self) -> float:
        return self.R_max

    @property
    def count(self) -> int:
        return self.M

    @property
    def closure(self) -> str:
        return "harmonic" if self.N >= 5 else "dirichlet"

    @cached_property
    def r(self) -> np.ndarray:
        f = self.faces
        return 0.5 * (f[1:] + f[:-1])

    @property
    def radius(self) -> np.ndarray:
        return self.r

    @cached_property
    def faces(self) -> np.ndarray:
        k = np.arange(self.M + 1) / self.M
        if self.stretch == 0.0:
            f = k * self.R_max
        else:
            f = self.R_max * np.sinh(self.stretch * k) / math.sinh(self.stretch)
        f[-1] = self.R_max
        return f

    @cached_property
    def weights(self) -> np.ndarray:
        f = self.faces
        return sphere_area(self.N) * (f[1:] ** self.N - f[:-1] ** self.N) / self.N

    @cached_property
    def _closure_coefficients(self) -> tuple[float, float]:
        """(kinetic coefficient, mass coefficient) multiplying u_M^2."""
        om, N, R = sphere_area(self.N), self.N, self.R_max
        a = om * R ** (N - 1) / (R - self.r[-1])
        if self.closure == "dirichlet":
            return a, 0.0
        b = om * (N - 2) * R ** (N - 2)
        ratio = a / (a + b)
        return a * b / (a + b), om * R**N / (N - 4) * ratio**2

    @cached_property
    def face_coefficients(self) -> np.ndarray:
        f = self.faces[1:-1]
        return sphere_area(self.N) * f ** (self.N - 1) / np.diff(self.r)

    def rescaled(self, t: float) -> "RadialGridSpec":
        return RadialGridSpec(self.N, self.M, self.R_max / t, self.stretch)

    # reductions ------------------------------------------------------------
    def integrate(self, f: np.ndarray) -> float:
        return float(np.dot(self.weights, f))

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        if np.iscomplexobj(u) or np.iscomplexobj(v):
            return float(np.dot(self.weights, (np.conj(u) * v).real))
        return float(np.dot(self.weights, u * v))

    def mass(self, u: np.ndarray) -> float:
        a2 = np.abs(u) ** 2
        return float(np.dot(self.weights, a2) + self._closure_coefficients[1] * a2[-1])

    def mass_gradient(self, u: np.ndarray) -> np.ndarray:
        """Half the weighted-metric gradient of ``mass``."""
        g = np.array(u, copy=True)
        g[-1] = g[-1] * (1.0 + self._closure_coefficients[1] / self.weights[-1])
        return g

    def _stiffness_apply(self, u: np.ndarray) -> np.ndarray:
        c = self.face_coefficients
        d = np.diff(u)
        out = np.zeros_like(u)
        out[:-1] -= c * d
        out[1:] += c * d
        out[-1] += self._closure_coefficients[0] * u[-1]
        return out

    def kinetic(self, u: np.ndarray) -> float:
        d = np.abs(np.diff(u)) ** 2
        return float(np.dot(self.face_coefficients, d) + self._closure_coefficients[0] * abs(u[-1]) ** 2)

    def neg_laplacian(self, u: np.ndarray) -> np.ndarray:
        return self._stiffness_apply(u) / self.weights

    def derivative(self, u: np.ndarray) -> np.ndarray:
        """Centred radial derivative at the nodes (one-sided at the ends)."""
        return np.gradient(u, self.r)

    @cached_property
    def _banded_stiffness(self) -> np.ndarray:
        c = self.face_coefficients
        ab = np.zeros((3, self.M))
        ab[0, 1:] = -c
        ab[2, :-1] = -c
        diag = np.zeros(self.M)
        diag[:-1] += c
        diag[1:] += c
        diag[-1] += self._closure_coefficients[0]
        ab[1] = diag
        return ab

    def precondition(self, g: np.ndarray, shift: float = 1.0) -> np.ndarray:
        ab = self._banded_stiffness.copy()
        ab[1] += shift * self.weights
        return solve_banded((1, 1), ab, self.weights * g)

    def sobolev_sq(self, u: np.ndarray, s: float) -> float:
        if s == 0:
            return self.mass(u)
        if s == 1:
            return self.mass(u) + self.kinetic(u)
        raise UnsupportedError("radial grids support sobolev_norm only for s in {0, 1}")

    def gaussian(self, sigma: float, center=None) -> np.ndarray:
        return np.exp(-self.r**2 / (2.0 * sigma**2))


Grid = GridSpec | RadialGridSpec


def make_grid(N: int, L: float, n: int) -> GridSpec:
    """Periodic tensor grid on [-L, L)^N with n samples per axis."""
    return GridSpec(int(N), float(L), int(n))


def make_radial_grid(N: int, M: int, R_max: float, stretch: float = DEFAULT_STRETCH) -> RadialGridSpec:
    return RadialGridSpec(int(N), int(M), float(R_max), float(stretch))


# --------------------------------------------------------------------------
# fields
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Field:
    """Samples of a function on a grid (row-major for tensor grids)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != self.grid.shape:
            if v.size == self.grid.size:
                v = v.reshape(self.grid.shape)
            else:
                raise UsageError(
                    f"field has {v.size} samples, grid needs {self.grid.size}"
                )
        object.__setattr__(self, "values", v)

    def check_finite(self) -> "Field":
        if not np.all(np.isfinite(self.values)):
            raise DomainError("field contains NaN or Inf samples")
        return self

    def with_values(self, values: np.ndarray) -> "Field":
        return Field(self.grid, values)

    def __mul__(self, s):
        return Field(self.grid, self.values * s)

    __rmul__ = __mul__

    def conj(self) -> "Field":
        return Field(self.grid, np.conj(self.values))


def mass(u: Field) -> float:
    """L^2 mass (sum |u|^2 dx^N)."""
    return u.grid.mass(u.values)


def gradient_sq_norm(u: Field) -> float:
    """Kinetic term ||grad u||_2^2."""
    return u.grid.kinetic(u.values)


def sobolev_norm(u: Field, s: float) -> float:
    """H^s norm; radial grids accept only s in {0, 1}."""
    if s < 0:
        raise DomainError("Sobolev order must be non-negative")
    return math.sqrt(max(u.grid.sobolev_sq(u.values, s), 0.0))


# --------------------------------------------------------------------------
# Riesz kernels
# --------------------------------------------------------------------------

_GL_NODES = 16


def _radial_profile(N: int, x: np.ndarray) -> np.ndarray:
    """Angular integral of exp(-i k.x) over |x| = r as a function of kr."""
    if N == 1:
        return 2.0 * np.cos(x)
    if N == 2:
        return 2.0 * np.pi * j0(x)
    return 4.0 * np.pi * np.sinc(x / np.pi)


def truncated_kernel_transform(kmag: np.ndarray, gamma: float, N: int, R: float) -> np.ndarray:
    """Fourier transform of |x|^{-gamma} 1_{|x|<=R} at the radii ``kmag``.

    Composite Gauss-Legendre panels in r, with a Gauss-Jacobi first panel that
    absorbs the r^{N-1-gamma} endpoint singularity. Panels span at most ~2
    radians of the oscillation at the largest |k|.
    """
    kmag = np.asarray(kmag, dtype=float)
    beta = N - 1.0 - gamma
    kmax = float(np.max(kmag)) if kmag.size else 0.0
    n_pan = max(32, int(math.ceil(kmax * R / 2.0)) + 1)
    h = R / n_pan
    xg, wg = roots_legendre(_GL_NODES)
    xj, wj = roots_jacobi(_GL_NODES, 0.0, beta)
    # first panel [0, h]: integral of s^beta f(s) via Jacobi weight (1+x)^beta
    r0 = h * (xj + 1.0) / 2.0
    w0 = wj * (h / 2.0) ** (beta + 1.0)
    left = np.arange(1, n_pan) * h
    rr = (left[:, None] + h * (xg[None, :] + 1.0) / 2.0).ravel()
    ww = np.tile(wg * h / 2.0, n_pan - 1) * rr**beta
    nodes = np.concatenate([r0, rr])
    wts = np.concatenate([w0, ww])
    out = np.empty_like(kmag)
    chunk = max(1, int(2e7 // nodes.size))
    for s in range(0, kmag.size, chunk):
        kk = kmag[s : s + chunk]
        out[s : s + chunk] = _radial_profile(N, kk[:, None] * nodes[None, :]) @ wts
    zero = kmag == 0.0
    out[zero] = sphere_area(N) * R ** (N - gamma) / (N - gamma)
    return out


def angle_averaged_kernel(r: np.ndarray, s: np.ndarray, gamma: float, N: int) -> np.ndarray:
    """Sphere average of |x - y|^{-gamma} over |x| = r, |y| = s (r != s)."""
    big = np.maximum(r, s)
    small = np.minimum(r, s)
    z = (small / big) ** 2
    a = gamma / 2.0
    return big ** (-gamma) * hyp2f1(a, a - N / 2.0 + 1.0, N / 2.0, z)


def _angle_average_quad(r: float, s: float, gamma: float, N: int) -> float:
    """Adaptive-quadrature version of the angular average (used as oracle)."""
    norm = math.sqrt(math.pi) * math.gamma((N - 1) / 2) / math.gamma(N / 2)
    f = lambda th: (r * r + s * s - 2 * r * s * math.cos(th)) ** (-gamma / 2) * math.sin(th) ** (N - 2)
    val, err = sint.quad(f, 0.0, math.pi, limit=400, points=[1e-8, 1e-4, 1e-2])
    return val / norm


@dataclass(frozen=True, eq=False)
class RieszKernel:
    """Discrete convolution with |x|^{-gamma} on one grid."""

    grid: Grid
    gamma: float
    data: np.ndarray  # half-spectrum multiplier (tensor) or M x M matrix (radial)

    @property
    def zero_mode(self) -> float:
        if self.grid.kind != "tensor":
            raise UsageError("zero mode is defined for tensor grids only")
        return float(self.data.flat[0])

    def convolve(self, rho: np.ndarray) -> np.ndarray:
        if self.grid.kind == "tensor":
            return self.grid.irfft(self.data * self.grid.rfft(rho))
        return self.data @ (self.grid.weights * rho)

    def convolve_hat(self, rho_hat: np.ndarray) -> np.ndarray:
        """Tensor only: potential from a precomputed real FFT of the density."""
        return self.grid.irfft(self.data * rho_hat)

    def rescaled(self, t: float) -> "RieszKernel":
        """Kernel on ``grid.rescaled(t)`` (exact homogeneity, no recomputation)."""
        g = self.grid.rescaled(t)
        if self.grid.kind == "tensor":
            return RieszKernel(g, self.gamma, self.data * t ** (self.gamma - self.grid.N))
        return RieszKernel(g, self.gamma, self.data * t**self.gamma)


def _check_gamma(gamma: float, N: int) -> None:
    if not (0.0 < gamma < min(N, 4)):
        raise ConfigError(f"Riesz exponent gamma={gamma} requires 0<gamma<min{{N,4}} (N={N})")


def _tensor_kernel(grid: GridSpec, gamma: float) -> np.ndarray:
    k2 = grid.k2_half
    # squared lattice index |m|^2 is an integer; transform each distinct radius once
    m2 = np.rint(k2 * (grid.L / math.pi) ** 2).astype(np.int64)
    uniq, inv = np.unique(m2, return_inverse=True)
    kvals = np.sqrt(uniq.astype(float)) * math.pi / grid.L
    vals = truncated_kernel_transform(kvals, gamma, grid.N, grid.L)
    return vals[inv].reshape(k2.shape)


def _radial_kernel(grid: RadialGridSpec, gamma: float) -> np.ndarray:
    N, r = grid.N, grid.r
    i, j = np.triu_indices(grid.M, k=1)
    K = np.zeros((grid.M, grid.M))
    vals = angle_averaged_kernel(r[i], r[j], gamma, N)
    K[i, j] = vals
    K[j, i] = vals
    # diagonal: kernel averaged over the node's own shell (integrable singularity)
    om = sphere_area(N)
    f = grid.faces
    one = np.array(1.0)
    shell = lambda x: angle_averaged_kernel(one, np.array(x), gamma, N) * om * x ** (N - 1)
    for m in range(grid.M):
        # homogeneity: the cell integral is r^{N-gamma} times one over [a/r, b/r]
        ri = r[m]
        total = 0.0
        for a, b in ((f[m], ri), (ri, f[m + 1])):
            val, err = sint.quad(shell, a / ri, b / ri, limit=200, epsabs=0.0, epsrel=1e-10)
            if not math.isfinite(val) or err > 1e-6 * abs(val):
                raise NumericError(f"kernel quadrature failed in cell (r={ri}, s in [{a}, {b}])")
            total += val * ri ** (N - gamma)
        K[m, m] = total / grid.weights[m]
    if not np.all(np.isfinite(K)):
        bad = np.argwhere(~np.isfinite(K))[0]
        raise NumericError(f"non-finite kernel entry at cell (r={r[bad[0]]}, s={r[bad[1]]})")
    return K


def build_kernel(grid: Grid, gamma: float) -> RieszKernel:
    """Single Riesz kernel |x|^{-gamma} discretized on ``grid``."""
    gamma = float(gamma)
    _check_gamma(gamma, grid.N)
    if grid.kind == "tensor":
        return RieszKernel(grid, gamma, _tensor_kernel(grid, gamma))
    return RieszKernel(grid, gamma, _radial_kernel(grid, gamma))


@dataclass(frozen=True, eq=False)
class KernelSet:
    """Focusing (gamma1) and defocusing (gamma2) kernels on one grid."""

    grid: Grid
    k1: RieszKernel
    k2: RieszKernel

    @property
    def gamma1(self) -> float:
        return self.k1.gamma

    @property
    def gamma2(self) -> float:
        return self.k2.gamma

    def slot(self, which: int) -> RieszKernel:
        if which == 1:
            return self.k1
        if which == 2:
            return self.k2
        raise UsageError(f"kernel slot must be 1 or 2, got {which}")

    def rescaled(self, t: float) -> "KernelSet":
        return KernelSet(self.grid.rescaled(t), self.k1.rescaled(t), self.k2.rescaled(t))

    def check_grid(self, grid: Grid) -> None:
        if grid != self.grid:
            raise UsageError("field grid does not match the kernel grid")


def check_exponents(N: int, gamma1: float, gamma2: float) -> list[str]:
    """All violations of 0 < gamma2 < gamma1 < min{N, 4}."""
    problems = []
    cap = min(N, 4)
    if not (0.0 < gamma2):
        problems.append(f"gamma2={gamma2} violates 0<gamma2")
    if not (gamma2 < gamma1):
        problems.append(f"gamma1={gamma1}, gamma2={gamma2}: requires gamma2 < gamma1 (strict)")
    if not (gamma1 < cap):
        problems.append(f"gamma1={gamma1} violates gamma1<min{{N,4}}={cap}")
    return problems


def build_kernels(grid: Grid, gamma1: float, gamma2: float) -> KernelSet:
    """Kernels for the pair 0 < gamma2 < gamma1 < min{N, 4}."""
    problems = check_exponents(grid.N, gamma1, gamma2)
    if problems:
        raise ConfigError([p + " (requires 0<gamma2<gamma1<min{N,4})" for p in problems])
    return KernelSet(grid, build_kernel(grid, gamma1), build_kernel(grid, gamma2))


def riesz_convolve(rho: Field, kernels: KernelSet | RieszKernel, slot: int = 1) -> Field:
    """Potential |x|^{-gamma} * rho for a real density."""
    kern = kernels.slot(slot) if isinstance(kernels, KernelSet) else kernels
    if rho.grid != kern.grid:
        raise UsageError("density grid does not match the kernel grid")
    v = np.asarray(rho.values)
    if np.iscomplexobj(v):
        if np.max(np.abs(v.imag), initial=0.0) > 1e-10 * max(np.max(np.abs(v.real), initial=0.0), 1e-300):
            raise UsageError("density must be real")
        v = v.real
    return Field(rho.grid, kern.convolve(v))


# --------------------------------------------------------------------------
# interpolation
# --------------------------------------------------------------------------


def _interp_matrix(grid: GridSpec, points: np.ndarray) -> np.ndarray:
    """Rows evaluate the trigonometric interpolant at ``points`` from FFT data."""
    k = grid.wavenumbers()
    phase = np.outer(points + grid.L, k)
    E = np.exp(1j * phase) / grid.n
    ny = grid.n // 2
    E[:, ny] = np.cos(phase[:, ny]) / grid.n
    return E


def interpolate_tensor(values: np.ndarray, grid: GridSpec, axes_points: Sequence[np.ndarray]) -> np.ndarray:
    """Trigonometric interpolant of ``values`` on the tensor product of points."""
    out = grid.fft(values)
    for a, pts in enumerate(axes_points):
        E = _interp_matrix(grid, np.asarray(pts, dtype=float))
        out = np.moveaxis(np.tensordot(E, out, axes=([1], [a])), 0, a)
    if not np.iscomplexobj(values):
        out = out.real
    return out


def interpolate_radial(values: np.ndarray, grid: RadialGridSpec, points: np.ndarray) -> np.ndarray:
    """Even cubic-spline interpolant, continued harmonically (or by zero) past R_max."""
    r = grid.r
    rr = np.concatenate([-r[::-1], r])
    vv = np.concatenate([values[::-1], values])
    spline = CubicSpline(rr, vv)
    pts = np.asarray(points, dtype=float)
    out = spline(np.minimum(pts, r[-1]))
    beyond = pts > r[-1]
    if grid.closure == "harmonic":
        out[beyond] = values[-1] * (r[-1] / pts[beyond]) ** (grid.N - 2)
    else:
        out[beyond] = 0.0
    return out


def resample(u: Field, target: Grid) -> Field:
    """Evaluate u's interpolant on another grid of the same kind and dimension."""
    if target.kind != u.grid.kind or target.N != u.grid.N:
        raise UsageError("resampling requires grids of the same kind and dimension")
    if target.kind == "tensor":
        return Field(target, interpolate_tensor(u.values, u.grid, [target.axis()] * target.N))
    return Field(target, interpolate_radial(u.values, u.grid, target.r))


def tail_mass(u: Field, R: float) -> float:
    """Mass outside the ball of radius R."""
    outside = u.grid.radius >= R
    a2 = np.abs(u.values) ** 2
    if u.grid.kind == "tensor":
        return float(np.sum(a2[outside]) * u.grid.cell_volume)
    extra = u.grid._closure_coefficients[1] * a2[-1]
    return float(np.dot(u.grid.weights[outside], a2[outside]) + extra)
