"""Truncated Fourier series on the flat torus T^d = [0, 2pi)^d, d in {1, 2}.

A field is stored as a dense complex array of shape ``(2J+1,) * dim`` where
entry ``[j1 + J, j2 + J]`` holds the amplitude u_j of e^{i j.x}.  Retained
modes are those with sup-norm |j|_inf <= J; multipliers use the Euclidean
|j|, matching A = -Laplacian with symbol |j|^2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import GevreyOverflowError, ResolutionError

TWO_PI = 2.0 * math.pi
EXP_CAP = 700.0
_HERMITIAN_RTOL = 1e-9
_IMAG_RTOL = 1e-12


def _flip(a: np.ndarray) -> np.ndarray:
    return a[(slice(None, None, -1),) * a.ndim]


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Real periodic function given by its retained Fourier amplitudes.

    Hermitian symmetry ``u_{-j} = conj(u_j)`` is checked on construction
    and then enforced exactly, so downstream synthesis is real to rounding.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {c.ndim}")
        n = c.shape[0]
        if n % 2 == 0 or any(s != n for s in c.shape):
            raise ValueError(f"coefficient array must be (2J+1,)*dim, got {c.shape}")
        scale = float(np.max(np.abs(c))) if c.size else 0.0
        asym = float(np.max(np.abs(c - np.conj(_flip(c))))) if c.size else 0.0
        if asym > _HERMITIAN_RTOL * scale + 1e-300:
            raise ValueError(f"coefficients violate Hermitian symmetry (residual {asym:.3e})")
        c = 0.5 * (c + np.conj(_flip(c)))
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def dim(self) -> int:
        return self.coeffs.ndim

    @property
    def J(self) -> int:
        return (self.coeffs.shape[0] - 1) // 2

    @classmethod
    def zeros(cls, dim: int, J: int) -> "SpectralField":
        return cls(np.zeros((2 * J + 1,) * dim, dtype=complex))

    @classmethod
    def from_modes(cls, dim: int, J: int, modes: dict) -> "SpectralField":
        """Build from ``{j: amplitude}``; j is an int (1D) or a tuple."""
        c = np.zeros((2 * J + 1,) * dim, dtype=complex)
        for j, a in modes.items():
            jj = (j,) if np.isscalar(j) else tuple(j)
            if len(jj) != dim or max(abs(x) for x in jj) > J:
                raise ValueError(f"mode {j} outside cutoff {J} in dim {dim}")
            c[tuple(x + J for x in jj)] += a
        return cls(c)

    def __getitem__(self, j) -> complex:
        jj = (j,) if np.isscalar(j) else tuple(j)
        return complex(self.coeffs[tuple(x + self.J for x in jj)])

    def with_cutoff(self, J: int) -> "SpectralField":
        """Zero-pad or truncate to a new cutoff."""
        if J == self.J:
            return self
        out = np.zeros((2 * J + 1,) * self.dim, dtype=complex)
        m = min(J, self.J)
        src = (slice(self.J - m, self.J + m + 1),) * self.dim
        dst = (slice(J - m, J + m + 1),) * self.dim
        out[dst] = self.coeffs[src]
        return SpectralField(out)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        J = max(self.J, other.J)
        return SpectralField(self.with_cutoff(J).coeffs + other.with_cutoff(J).coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return self + other.scale(-1.0)

    def scale(self, a: float) -> "SpectralField":
        return SpectralField(self.coeffs * a)

    def is_zero(self) -> bool:
        return not np.any(self.coeffs)


@dataclass(frozen=True, eq=False)
class GridField:
    """Real samples at x_k = 2 pi k / N on each axis."""

    values: np.ndarray

    @property
    def dim(self) -> int:
        return self.values.ndim

    @property
    def N(self) -> int:
        return self.values.shape[0]


def mode_indices(dim: int, J: int) -> tuple[np.ndarray, ...]:
    """Integer mode components broadcast to the coefficient shape."""
    k = np.arange(-J, J + 1)
    return tuple(np.meshgrid(*([k] * dim), indexing="ij"))


def mode_norm_sq(dim: int, J: int) -> np.ndarray:
    return sum(k.astype(float) ** 2 for k in mode_indices(dim, J))


def grid_points(N: int) -> np.ndarray:
    return TWO_PI * np.arange(N) / N


def synthesize(coeffs: np.ndarray, N: int) -> np.ndarray:
    """Complex grid values sum_j u_j e^{i j.x_k}; no resolution checks."""
    J = (coeffs.shape[0] - 1) // 2
    d = coeffs.ndim
    idx = np.arange(-J, J + 1) % N
    full = np.zeros((N,) * d, dtype=complex)
    full[np.ix_(*([idx] * d))] = coeffs
    return np.fft.ifftn(full) * N**d


def analyze(values: np.ndarray, J: int) -> np.ndarray:
    """Inverse of :func:`synthesize` restricted to |j|_inf <= J."""
    N = values.shape[0]
    d = values.ndim
    full = np.fft.fftn(values) / N**d
    idx = np.arange(-J, J + 1) % N
    return full[np.ix_(*([idx] * d))]


def to_grid(f: SpectralField, N: int) -> GridField:
    if N < 2 * f.J + 2:
        raise ResolutionError(f"N={N} below 2J+2={2 * f.J + 2}")
    z = synthesize(f.coeffs, N)
    amp = float(np.max(np.abs(f.coeffs)))
    resid = float(np.max(np.abs(z.imag)))
    if resid > _IMAG_RTOL * max(amp, 1e-300) and resid > 0:
        raise ValueError(f"synthesis left imaginary residue {resid:.3e}")
    return GridField(z.real.copy())


def from_grid(g: GridField, J: int) -> SpectralField:
    if g.N < 2 * J + 2:
        raise ResolutionError(f"N={g.N} below 2J+2={2 * J + 2}")
    return SpectralField(analyze(g.values, J))


def l2_norm(f: SpectralField) -> float:
    return math.sqrt(TWO_PI**f.dim * float(np.sum(np.abs(f.coeffs) ** 2)))


def inner(f: SpectralField, g: SpectralField) -> float:
    J = max(f.J, g.J)
    a, b = f.with_cutoff(J).coeffs, g.with_cutoff(J).coeffs
    return float((TWO_PI**f.dim * np.sum(a * np.conj(b))).real)


def apply_A_power(f: SpectralField, s: float) -> SpectralField:
    if s == 0:
        return f
    k2 = mode_norm_sq(f.dim, f.J)
    with np.errstate(divide="ignore"):
        sym = np.where(k2 > 0, k2**s, 0.0)
    return SpectralField(f.coeffs * sym)


def gevrey_exponent(dim: int, J: int, tau: float, beta: float) -> np.ndarray:
    """tau * |j|^beta on the coefficient grid."""
    return tau * np.sqrt(mode_norm_sq(dim, J)) ** beta


def check_gevrey_cap(dim: int, J: int, tau: float, beta: float) -> None:
    e = gevrey_exponent(dim, J, tau, beta)
    if float(e.max()) > EXP_CAP:
        pos = np.unravel_index(int(np.argmax(e)), e.shape)
        j = tuple(int(p) - J for p in pos)
        raise GevreyOverflowError(
            f"exponent tau*|j|^beta = {float(e.max()):.1f} > {EXP_CAP} at mode j={j}"
        )


def apply_gevrey_multiplier(f: SpectralField, tau: float, beta: float) -> SpectralField:
    """u_j -> e^{tau |j|^beta} u_j."""
    if not 0 < beta <= 1:
        raise ValueError("beta must lie in (0, 1]")
    check_gevrey_cap(f.dim, f.J, tau, beta)
    return SpectralField(f.coeffs * np.exp(gevrey_exponent(f.dim, f.J, tau, beta)))


def log_weighted_norm(f: SpectralField, log_weight: np.ndarray) -> float:
    """log of sqrt((2pi)^d sum_j w_j^2 |u_j|^2), given log w_j; overflow-free."""
    a = np.abs(f.coeffs)
    nz = a > 0
    if not nz.any():
        return -math.inf
    x = 2.0 * (log_weight[nz] + np.log(a[nz]))
    m = float(x.max())
    return 0.5 * (f.dim * math.log(TWO_PI) + m + math.log(float(np.sum(np.exp(x - m)))))


def gradient(f: SpectralField) -> list[SpectralField]:
    return [SpectralField(1j * k * f.coeffs) for k in mode_indices(f.dim, f.J)]


def product_grid_size(Jf: int, Jg: int, Jout: int) -> int:
    """Smallest N for which the grid product is the exact truncated convolution."""
    return max(Jf + Jg + Jout + 1, 2 * max(Jf, Jg, Jout) + 2)


def pointwise_product(f: SpectralField, g: SpectralField, J: int | None = None) -> SpectralField:
    """Dealiased product truncated to cutoff J (default: the larger input cutoff).

    For equal cutoffs the grid has 3J+1 points per axis, the 2/3 rule.
    """
    if f.dim != g.dim:
        raise ValueError(f"dimension mismatch: {f.dim} vs {g.dim}")
    if J is None:
        J = max(f.J, g.J)
    N = product_grid_size(f.J, g.J, J)
    vals = synthesize(f.coeffs, N).real * synthesize(g.coeffs, N).real
    return SpectralField(analyze(vals, J))


def sobolev_linf_bound(f: SpectralField) -> float:
    """sum_j |u_j|, a rigorous bound for sup |f|."""
    return float(np.sum(np.abs(f.coeffs)))


def evaluate(f: SpectralField, points) -> np.ndarray:
    """Exact series evaluation at arbitrary points, shape (..., dim) or (...,) in 1D."""
    pts = np.asarray(points, dtype=float)
    k = np.arange(-f.J, f.J + 1)
    if f.dim == 1:
        x = pts.reshape(-1)
        out = np.exp(1j * np.outer(x, k)) @ f.coeffs
        return out.real.reshape(pts.shape)
    flat = pts.reshape(-1, 2)
    out = np.empty(flat.shape[0])
    for s in range(0, flat.shape[0], 65536):
        blk = flat[s:s + 65536]
        ex = np.exp(1j * np.outer(blk[:, 0], k))
        ey = np.exp(1j * np.outer(blk[:, 1], k))
        out[s:s + 65536] = np.einsum("pa,ab,pb->p", ex, f.coeffs, ey).real
    return out.reshape(pts.shape[:-1])


def write_snapshot(path, f: SpectralField, t: float = 0.0) -> None:
    """Text snapshot: ``dim J t`` header, then ``j1 [j2] re im`` per mode."""
    lines = [f"{f.dim} {f.J} {t:.17g}"]
    J = f.J
    for idx in np.ndindex(*f.coeffs.shape):
        j = " ".join(str(i - J) for i in idx)
        z = f.coeffs[idx]
        lines.append(f"{j} {z.real:.17g} {z.imag:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_snapshot(path) -> tuple[SpectralField, float]:
    rows = Path(path).read_text().split("\n")
    dim, J, t = rows[0].split()
    dim, J = int(dim), int(J)
    c = np.zeros((2 * J + 1,) * dim, dtype=complex)
    for row in rows[1:]:
        if not row.strip():
            continue
        parts = row.split()
        j = tuple(int(x) + J for x in parts[:dim])
        c[j] = complex(float(parts[dim]), float(parts[dim + 1]))
    return SpectralField(c), float(t)
