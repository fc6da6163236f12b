"""Gevrey-regular coefficient fields v, w and their certified constants."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import GevreyOverflowError, NotInClassError
from .fourier import (
    EXP_CAP,
    SpectralField,
    check_gevrey_cap,
    gevrey_exponent,
    gradient,
    log_weighted_norm,
    mode_indices,
    mode_norm_sq,
    read_snapshot,
    synthesize,
    write_snapshot,
)


@dataclass(frozen=True)
class GevreyParams:
    beta: float
    delta: float

    def __post_init__(self):
        if not 0 < self.beta <= 1:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")


@dataclass(frozen=True, eq=False)
class CoefficientSet:
    v: SpectralField
    w: tuple[SpectralField, ...]
    params: GevreyParams
    M0: float
    M1: float
    Kv: float
    Kw: float
    time_independent: bool = True
    seed: int | None = None

    @property
    def dim(self) -> int:
        return self.v.dim

    def is_zero(self) -> bool:
        return self.v.is_zero() and all(c.is_zero() for c in self.w)


def _positive_half(dim: int, J: int) -> np.ndarray:
    """Mask of modes j > 0 in lexicographic order."""
    ks = mode_indices(dim, J)
    if dim == 1:
        return ks[0] > 0
    return (ks[0] > 0) | ((ks[0] == 0) & (ks[1] > 0))


def synth_random_gevrey(seed: int, params: GevreyParams, margin: float, J: int,
                        amplitude: float, dim: int = 1) -> SpectralField:
    """Random field with |u_j| ~ amplitude * e^{-margin delta |j|^beta}.

    Gaussian amplitudes are drawn for the positive half of the mode lattice
    and mirrored, so the result is real and depends only on ``seed``.
    """
    if margin <= 1:
        raise ValueError("margin must exceed 1")
    check_gevrey_cap(dim, J, margin * params.delta, params.beta)
    rng = np.random.default_rng(seed)
    shape = (2 * J + 1,) * dim
    g = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    pos = _positive_half(dim, J)
    g = np.where(pos, g, np.conj(g[(slice(None, None, -1),) * dim]))
    centre = (J,) * dim
    g[centre] = g[centre].real
    decay = np.exp(-gevrey_exponent(dim, J, margin * params.delta, params.beta))
    return SpectralField(amplitude * g * decay)


def _ell1_and_lipschitz(f: SpectralField) -> tuple[float, float]:
    a = np.abs(f.coeffs)
    return float(a.sum()), float(np.sum(np.sqrt(mode_norm_sq(f.dim, f.J)) * a))


def certified_sup(fields, N: int | None = None) -> float:
    """Rigorous bound for sup_x |(f_1(x), ..., f_m(x))|_2.

    The smaller of two valid bounds: the l1 sum of amplitudes, and the
    grid maximum plus a Lipschitz correction covering the gaps between
    grid points (half-diagonal pi sqrt(d) / N).
    """
    fields = list(fields)
    dim = fields[0].dim
    J = max(f.J for f in fields)
    if N is None:
        N = max(8 * J, 16)
    sq = np.zeros((N,) * dim)
    l1 = lip = 0.0
    for f in fields:
        sq += synthesize(f.coeffs, N).real ** 2
        a, b = _ell1_and_lipschitz(f)
        l1 += a * a
        lip += b * b
    grid_bound = float(np.sqrt(sq.max())) + math.pi * math.sqrt(dim) / N * math.sqrt(lip)
    return min(grid_bound, math.sqrt(l1))


def gevrey_sobolev_norm(f: SpectralField, params: GevreyParams) -> float:
    """||(A^d + I) e^{delta A^{beta/2}} f||_{L2} by weighted summation."""
    d = f.dim
    try:
        check_gevrey_cap(d, f.J, params.delta, params.beta)
    except GevreyOverflowError as exc:
        raise NotInClassError(f"not in class at delta={params.delta}: {exc}") from None
    k2 = mode_norm_sq(d, f.J)
    logw = np.log(k2**d + 1.0) + gevrey_exponent(d, f.J, params.delta, params.beta)
    ln = log_weighted_norm(f, logw)
    if ln > EXP_CAP:
        raise NotInClassError(f"not in class at delta={params.delta}: norm exceeds e^{EXP_CAP}")
    return math.exp(ln) if ln > -math.inf else 0.0


def certify_constants(v: SpectralField, w, params: GevreyParams,
                      N: int | None = None) -> tuple[float, float, float, float]:
    """Return (M0, M1, Kv, Kw); M0, M1 are clamped up to 1."""
    w = list(w)
    if len(w) != v.dim:
        raise ValueError(f"drift needs {v.dim} components, got {len(w)}")
    M0 = max(1.0, certified_sup([v], N))
    jac = [g for comp in w for g in gradient(comp)]
    M1 = max(1.0, certified_sup(w, N) + certified_sup(jac, N))
    Kv = gevrey_sobolev_norm(v, params)
    Kw = math.sqrt(sum(gevrey_sobolev_norm(c, params) ** 2 for c in w))
    return M0, M1, Kv, Kw


def make_coefficients(v: SpectralField, w, params: GevreyParams,
                      seed: int | None = None) -> CoefficientSet:
    w = tuple(w)
    M0, M1, Kv, Kw = certify_constants(v, w, params)
    return CoefficientSet(v, w, params, M0, M1, Kv, Kw, True, seed)


def zero_coefficients(dim: int, params: GevreyParams | None = None, J: int = 1) -> CoefficientSet:
    params = params or GevreyParams(1.0, 0.1)
    z = SpectralField.zeros(dim, J)
    return make_coefficients(z, (z,) * dim, params)


def synth_coefficients(seed: int, dim: int, J: int, params: GevreyParams, margin: float,
                       amplitude: float) -> CoefficientSet:
    """v and each component of w from consecutive sub-seeds of ``seed``."""
    ss = np.random.SeedSequence(seed).spawn(dim + 1)
    seeds = [int(s.generate_state(1)[0]) for s in ss]
    v = synth_random_gevrey(seeds[0], params, margin, J, amplitude, dim)
    w = tuple(synth_random_gevrey(s, params, margin, J, amplitude, dim) for s in seeds[1:])
    return make_coefficients(v, w, params, seed)


def check_time_horizon(t0: float, M1: float, C: float = 2.0) -> bool:
    if C < 2:
        raise ValueError("C must be at least 2")
    return t0 <= 1.0 / (C * M1 * M1)


def write_bundle(directory, cs: CoefficientSet) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_snapshot(d / "v.txt", cs.v)
    for k, comp in enumerate(cs.w, 1):
        write_snapshot(d / f"w{k}.txt", comp)
    p = cs.params
    manifest = {
        "beta": p.beta, "delta": p.delta, "M0": cs.M0, "M1": cs.M1,
        "Kv": cs.Kv, "Kw": cs.Kw, "seed": cs.seed,
    }
    text = "".join(f"{k}={v if isinstance(v, (int, type(None))) else format(v, '.17g')}\n"
                   for k, v in manifest.items())
    (d / "manifest.txt").write_text(text)


def read_bundle(directory) -> CoefficientSet:
    d = Path(directory)
    kv = dict(line.split("=", 1) for line in (d / "manifest.txt").read_text().split("\n") if line)
    v, _ = read_snapshot(d / "v.txt")
    w = tuple(read_snapshot(d / f"w{k}.txt")[0] for k in range(1, v.dim + 1))
    seed = None if kv["seed"] == "None" else int(kv["seed"])
    return CoefficientSet(v, w, GevreyParams(float(kv["beta"]), float(kv["delta"])),
                          float(kv["M0"]), float(kv["M1"]), float(kv["Kv"]), float(kv["Kw"]),
                          True, seed)
