"""Certified upper bounds on zero counts via the Hermite interpolation remainder.

If u has n zeros (with multiplicity) on a segment of length L, then
|u(x)| <= L^n / n! * sup|u^(n)| on the segment.  A witness point where |u|
exceeds that quantity therefore proves fewer than n zeros.  Everything is
done in log domain; a relative slack of 1e-6 is added to the right side to
absorb floating-point rounding.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .fourier import SpectralField, mode_indices

LOG_SLACK = 1e-6
MAX_ORDER = 400


@dataclass(frozen=True)
class Segment:
    center: float
    halflength: float

    def __post_init__(self):
        if not 0 < self.halflength <= math.pi:
            raise ValueError(f"halflength must lie in (0, pi], got {self.halflength}")

    @property
    def length(self) -> float:
        return 2 * self.halflength

    @property
    def lo(self) -> float:
        return self.center - self.halflength

    @property
    def hi(self) -> float:
        return self.center + self.halflength


@dataclass(frozen=True, eq=False)
class LineSeries:
    """u(s) = Re sum_k c_k e^{i w_k s}: a 1D field or the trace of a 2D field on a line."""

    freqs: np.ndarray
    amps: np.ndarray

    @classmethod
    def from_field(cls, f: SpectralField) -> "LineSeries":
        if f.dim != 1:
            raise ValueError("use LineSeries.from_line for 2D fields")
        return cls(np.arange(-f.J, f.J + 1, dtype=float), np.array(f.coeffs)).merged()

    @classmethod
    def from_line(cls, f: SpectralField, p, theta: float) -> "LineSeries":
        """Trace of f on the line p + s (cos theta, sin theta)."""
        kx, ky = mode_indices(2, f.J)
        p = np.asarray(p, dtype=float)
        w = kx * math.cos(theta) + ky * math.sin(theta)
        c = f.coeffs * np.exp(1j * (kx * p[0] + ky * p[1]))
        return cls(w.reshape(-1), c.reshape(-1)).merged()

    def merged(self) -> "LineSeries":
        key = np.round(self.freqs, 12)
        uniq, inv = np.unique(key, return_inverse=True)
        amps = np.zeros(len(uniq), dtype=complex)
        np.add.at(amps, inv, self.amps)
        keep = amps != 0
        return LineSeries(uniq[keep], amps[keep])

    @property
    def max_freq(self) -> float:
        return float(np.max(np.abs(self.freqs))) if len(self.freqs) else 0.0

    def __call__(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return (np.exp(1j * np.outer(s.reshape(-1), self.freqs)) @ self.amps).real.reshape(s.shape)

    def log_ell1_derivative(self, n: int) -> float:
        """log sum_k |w_k|^n |c_k|, the global bound on |u^(n)|."""
        a = np.abs(self.amps)
        w = np.abs(self.freqs)
        if n == 0:
            return math.log(a.sum()) if a.sum() > 0 else -math.inf
        nz = (w > 0) & (a > 0)
        if not nz.any():
            return -math.inf
        x = n * np.log(w[nz]) + np.log(a[nz])
        m = float(x.max())
        return m + math.log(float(np.sum(np.exp(x - m))))

    def lattice_step(self) -> float:
        return math.pi / (16.0 * (self.max_freq + 1.0))

    def lattice(self, seg: Segment) -> np.ndarray:
        """Points k*h inside seg on a lattice fixed by the series (nested for nested segments)."""
        h = self.lattice_step()
        k = np.arange(math.ceil(seg.lo / h), math.floor(seg.hi / h) + 1)
        return k * h if len(k) else np.array([seg.center])


def _log_add(a: float, b: float) -> float:
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    m = max(a, b)
    return m + math.log(math.exp(a - m) + math.exp(b - m))


class _DerivativeTable:
    """Lattice values of u^(n) on a segment, scaled by max_freq^n to stay finite."""

    def __init__(self, series: LineSeries, seg: Segment):
        self.series = series
        self.s = series.lattice(seg)
        self.h = series.lattice_step()
        self.E = np.exp(1j * np.outer(self.s, series.freqs))
        self.wmax = series.max_freq
        self.ratio = 1j * series.freqs / self.wmax if self.wmax > 0 else np.zeros(len(series.freqs))

    def log_tight(self, n: int) -> float:
        """log of (lattice max |u^(n)| + h * sup|u^(n+1)|), a certified sup bound."""
        if self.wmax == 0:
            return -math.inf if n > 0 else self.series.log_ell1_derivative(0)
        vals = self.E @ (self.series.amps * self.ratio**n)
        gmax = float(np.max(np.abs(vals.real)))
        lip = self.series.log_ell1_derivative(n + 1) - n * math.log(self.wmax)
        corr = math.log(self.h) + lip
        return n * math.log(self.wmax) + _log_add(math.log(gmax) if gmax > 0 else -math.inf, corr)


def log_derivative_sup(series: LineSeries, n: int, seg: Segment, tight: bool = True) -> float:
    if n > MAX_ORDER:
        raise OverflowError(f"derivative order {n} above guard {MAX_ORDER}")
    g = series.log_ell1_derivative(n)
    if not tight:
        return g
    return min(g, _DerivativeTable(series, seg).log_tight(n))


def derivative_sup(f, n: int, seg: Segment, tight: bool = False) -> float:
    """Certified upper bound for sup over seg of |u^(n)|.

    The default is the global bound sum_j |j|^n |u_j|; ``tight`` also tries a
    lattice maximum plus Lipschitz correction and keeps the smaller.
    """
    series = f if isinstance(f, LineSeries) else LineSeries.from_field(f)
    return math.exp(log_derivative_sup(series, n, seg, tight))


@dataclass(frozen=True)
class ZeroCertificate:
    nstar: int
    sup_u: float  # witnessed lower bound for sup|u| on the segment
    deriv_bound: float  # upper bound for sup|u^(nstar)| (may be inf if beyond float range)
    log_deriv_bound: float
    log_margin: float
    length: float

    def decision(self) -> bool:
        """Recompute the strict inequality from the stored logs."""
        rhs = (self.nstar * math.log(self.length) - float(gammaln(self.nstar + 1))
               + self.log_deriv_bound + LOG_SLACK)
        return math.log(self.sup_u) - rhs > 0


def certify_zero_bound(f, seg: Segment, nmax: int = 200) -> ZeroCertificate | None:
    """Smallest n <= nmax with max|u| on seg > L^n/n! * sup|u^(n)|.

    The true zero count with multiplicity on seg is then < nstar.  Returns
    None (inconclusive) when u vanishes on the witness lattice or no n up
    to ``nmax`` works.
    """
    if nmax > MAX_ORDER:
        raise OverflowError(f"nmax={nmax} above guard {MAX_ORDER}")
    series = f if isinstance(f, LineSeries) else LineSeries.from_field(f)
    table = _DerivativeTable(series, seg)
    sup_u = float(np.max(np.abs(series(table.s))))
    if sup_u == 0:
        return None
    log_sup = math.log(sup_u)
    log_len = math.log(seg.length)
    for n in range(1, nmax + 1):
        logD = min(series.log_ell1_derivative(n), table.log_tight(n))
        rhs = n * log_len - float(gammaln(n + 1)) + logD + LOG_SLACK
        margin = log_sup - rhs
        if margin > 0:
            D = math.exp(logD) if logD < 709 else math.inf
            return ZeroCertificate(n, sup_u, D, logD, margin, seg.length)
    return None


def certify_on_line(f2d: SpectralField, p, theta: float, r: float,
                    nmax: int = 200) -> ZeroCertificate | None:
    """Certificate for the chord l cap B_{2r}(p), l through p with angle theta."""
    series = LineSeries.from_line(f2d, p, theta)
    return certify_zero_bound(series, Segment(0.0, 2 * r), nmax)


def segment_sign_changes(f, seg: Segment, points: int = 20001) -> int:
    """Dense-scan count of sign changes on a closed segment."""
    series = f if isinstance(f, LineSeries) else LineSeries.from_field(f)
    v = series(np.linspace(seg.lo, seg.hi, points))
    s = np.sign(v)
    s = s[s != 0]
    return int(np.sum(s[1:] != s[:-1]))


def write_certificates_csv(path, rows) -> None:
    """rows: (p, theta, r, certificate-or-None)."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["p", "theta", "r", "nstar", "log_margin"])
        for p, theta, r, cert in rows:
            ptxt = ";".join(format(float(x), ".17g") for x in np.atleast_1d(p))
            if cert is None:
                wr.writerow([ptxt, format(theta, ".17g"), format(r, ".17g"), "inconclusive", ""])
            else:
                wr.writerow([ptxt, format(theta, ".17g"), format(r, ".17g"), cert.nstar,
                             format(cert.log_margin, ".17g")])

