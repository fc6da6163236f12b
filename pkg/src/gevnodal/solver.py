"""Pseudo-spectral integrating-factor RK4 for u_t - Lap u = w.grad u + v u on T^d."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .coeffs import CoefficientSet
from .errors import ConfigError, DivergedError, SolverFault, ZeroFieldError
from .fourier import (
    EXP_CAP,
    SpectralField,
    analyze,
    gevrey_exponent,
    l2_norm,
    log_weighted_norm,
    mode_indices,
    mode_norm_sq,
    product_grid_size,
    synthesize,
)

ACCURACY_LIMIT = 0.5


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    t0: float
    snapshot_times: tuple[float, ...]
    J: int | None = None
    gevrey_radii: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        times = tuple(float(t) for t in self.snapshot_times)
        object.__setattr__(self, "snapshot_times", times)
        object.__setattr__(self, "gevrey_radii",
                           tuple((float(a), float(b)) for a, b in self.gevrey_radii))
        if self.dt <= 0 or self.t0 <= 0:
            raise ConfigError("dt and t0 must be positive")
        if not times:
            raise ConfigError("no snapshot times")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigError("snapshot times must be strictly increasing")
        if times[0] <= 0 or times[-1] > self.t0 * (1 + 1e-12):
            raise ConfigError(f"snapshot times must lie in (0, t0={self.t0}]")
        spacing = min(np.diff((0.0,) + times))
        if self.dt > spacing * (1 + 1e-12):
            raise ConfigError(f"dt={self.dt} exceeds snapshot spacing {spacing:.3g}")


@dataclass(frozen=True, eq=False)
class Snapshot:
    t: float
    u: SpectralField
    l2: float
    qD: float
    gevrey: dict = field(default_factory=dict)  # (delta, beta) -> log of ||e^{delta A^{beta/2}} u||


@dataclass(frozen=True, eq=False)
class SolveRecord:
    u0: SpectralField
    l2_0: float
    qD_0: float
    snapshots: tuple[Snapshot, ...]
    q0: float
    dt: float

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    @property
    def l2(self) -> np.ndarray:
        return np.array([s.l2 for s in self.snapshots])

    @property
    def qD(self) -> np.ndarray:
        return np.array([s.qD for s in self.snapshots])


def dirichlet_quotient(u: SpectralField) -> float:
    a2 = np.abs(u.coeffs) ** 2
    den = float(a2.sum())
    if den == 0:
        raise ZeroFieldError("Dirichlet quotient of the zero field")
    return float(np.sum(mode_norm_sq(u.dim, u.J) * a2)) / den


def heat_semigroup_gevrey_max(t: float, delta: float, beta: float, Jmax: int) -> float:
    """max over integers 0 <= j <= Jmax of delta j^beta - t j^2."""
    j = np.arange(Jmax + 1, dtype=float)
    return float(np.max(delta * j**beta - t * j * j))


class _Rhs:
    """Dealiased evaluation of w.grad u + v u on a fixed grid."""

    def __init__(self, coeffs: CoefficientSet, J: int):
        self.J = J
        self.dim = coeffs.dim
        Jc = max([coeffs.v.J] + [c.J for c in coeffs.w])
        self.N = product_grid_size(J, Jc, J)
        self.zero = coeffs.is_zero()
        self.v = synthesize(coeffs.v.coeffs, self.N).real
        self.w = [synthesize(c.coeffs, self.N).real for c in coeffs.w]
        self.ik = [1j * k for k in mode_indices(self.dim, J)]
        self.active_w = [not c.is_zero() for c in coeffs.w]

    def __call__(self, uh: np.ndarray) -> np.ndarray:
        if self.zero:
            return np.zeros_like(uh)
        acc = self.v * synthesize(uh, self.N).real
        for ik, wg, on in zip(self.ik, self.w, self.active_w):
            if on:
                acc += wg * synthesize(ik * uh, self.N).real
        return analyze(acc, self.J)


def _if_rk4(uh, rhs, k2, h):
    E = np.exp(-k2 * h)
    E2 = np.exp(-k2 * h / 2)
    a = rhs(uh)
    b = rhs(E2 * (uh + h / 2 * a))
    c = rhs(E2 * uh + h / 2 * b)
    d = rhs(E * uh + h * E2 * c)
    return E * uh + h / 6 * (E * a + 2 * E2 * (b + c) + d)


def _check_accuracy(coeffs: CoefficientSet, J: int, dt: float) -> None:
    if dt * (coeffs.M1 * J + coeffs.M0) > ACCURACY_LIMIT:
        raise ConfigError(
            f"dt*(M1*J + M0) = {dt * (coeffs.M1 * J + coeffs.M0):.3g} exceeds {ACCURACY_LIMIT}"
        )


def step(u: SpectralField, coeffs: CoefficientSet, dt: float) -> SpectralField:
    """One integrating-factor RK4 step; the Laplacian is applied exactly."""
    _check_accuracy(coeffs, u.J, dt)
    out = _if_rk4(u.coeffs, _Rhs(coeffs, u.J), mode_norm_sq(u.dim, u.J), dt)
    if not np.all(np.isfinite(out)):
        raise DivergedError("non-finite coefficients after step")
    return SpectralField(out)


def gevrey_log_norm(u: SpectralField, delta: float, beta: float) -> float:
    """log ||e^{delta A^{beta/2}} u||, or nan when the exponent cap is exceeded."""
    e = gevrey_exponent(u.dim, u.J, delta, beta)
    if float(e.max()) > EXP_CAP:
        return math.nan
    return log_weighted_norm(u, e)


def solve(u0: SpectralField, coeffs: CoefficientSet, config: SolverConfig) -> SolveRecord:
    """Integrate to each snapshot time, landing on it exactly.

    Each inter-snapshot interval is split into equal steps no longer than
    ``config.dt``.  q0 is the largest Dirichlet quotient seen at any step,
    including t = 0, so it bounds q_D over the whole sampled window.
    """
    if u0.is_zero():
        raise ZeroFieldError("initial data is identically zero")
    if u0.dim != coeffs.dim:
        raise ConfigError(f"u0 has dim {u0.dim}, coefficients dim {coeffs.dim}")
    J = config.J or u0.J
    u0 = u0.with_cutoff(J)
    _check_accuracy(coeffs, J, config.dt)
    rhs = _Rhs(coeffs, J)
    k2 = mode_norm_sq(u0.dim, J)
    uh = np.array(u0.coeffs)
    l2_0 = l2_norm(u0)
    qD_0 = dirichlet_quotient(u0)
    q0 = qD_0
    t = 0.0
    snaps = []
    for ts in config.snapshot_times:
        n = max(1, math.ceil((ts - t) / config.dt - 1e-9))
        h = (ts - t) / n
        for _ in range(n):
            uh = _if_rk4(uh, rhs, k2, h)
            if not np.all(np.isfinite(uh)):
                raise DivergedError(f"non-finite coefficients near t={t:.4g}")
            a2 = np.abs(uh) ** 2
            s = float(a2.sum())
            if s == 0:
                raise SolverFault(f"solution vanished near t={t:.4g} from nonzero data")
            q0 = max(q0, float(np.sum(k2 * a2)) / s)
        t = ts
        u = SpectralField(uh)
        l2 = l2_norm(u)
        if not l2 > 0:
            raise SolverFault(f"zero L2 norm at t={ts}")
        gev = {(dl, b): gevrey_log_norm(u, dl, b) for dl, b in config.gevrey_radii}
        snaps.append(Snapshot(ts, u, l2, dirichlet_quotient(u), gev))
    return SolveRecord(u0, l2_0, qD_0, tuple(snaps), q0, config.dt)


@dataclass
class LowerBoundReport:
    times: list
    margins: list  # log(||u||^2) - log(RHS); >= log(1 - slack) passes
    passed: bool
    slack: float


def verify_lower_bound(rec: SolveRecord, M0: float, M1: float, q0: float,
                       slack: float = 1e-6) -> LowerBoundReport:
    """Check ||u(t)||^2 >= exp(-2t(M1 + M0 + q0)) ||u0||^2 at every snapshot."""
    log0 = 2 * math.log(rec.l2_0)
    margins = [2 * math.log(s.l2) - (log0 - 2 * s.t * (M1 + M0 + q0)) for s in rec.snapshots]
    floor = math.log1p(-slack)
    return LowerBoundReport(list(rec.times), margins, all(m >= floor for m in margins), slack)


@dataclass
class GevreyReport:
    delta: float
    beta: float
    times: list
    g: list
    fitted_a: float
    max_violation: float
    skipped: list


def smoothing_envelope(t, delta: float, beta: float, C1: float):
    t = np.asarray(t, dtype=float)
    return delta ** (2 / (2 - beta)) * t ** (-beta / (2 - beta)) + t * C1


def verify_gevrey_smoothing(rec: SolveRecord, delta: float, beta: float,
                            C1: float) -> GevreyReport:
    """Fit g(t) = log(||e^{delta A^{beta/2}} u|| / ||u||) <= a * envelope(t).

    ``a`` is the least-squares coefficient; ``max_violation`` is the largest
    relative excess of g over the fitted envelope (0 when dominated).
    """
    key = (float(delta), float(beta))
    times, g, skipped = [], [], []
    for s in rec.snapshots:
        ln = s.gevrey.get(key)
        if ln is None:
            raise KeyError(f"no Gevrey norm recorded at {key}")
        if math.isnan(ln):
            skipped.append(s.t)
            continue
        times.append(s.t)
        g.append(ln - math.log(s.l2))
    if not times:
        return GevreyReport(delta, beta, [], [], math.nan, math.nan, skipped)
    h = smoothing_envelope(times, delta, beta, C1)
    gv = np.array(g)
    a = float(np.dot(gv, h) / np.dot(h, h))
    viol = float(max(0.0, np.max((gv - a * h) / (a * h)))) if a > 0 else math.inf
    return GevreyReport(delta, beta, times, g, a, viol, skipped)


def write_diagnostics_csv(path, rec: SolveRecord, radii=None) -> None:
    radii = list(radii if radii is not None else
                 (rec.snapshots[0].gevrey.keys() if rec.snapshots else []))
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["t", "l2", "qD"] + [f"gevrey_{d:g}_{b:g}" for d, b in radii])
        for s in rec.snapshots:
            gev = [format(math.exp(s.gevrey[k]), ".17g") if not math.isnan(s.gevrey[k]) else "nan"
                   for k in radii]
            wr.writerow([format(s.t, ".17g"), format(s.l2, ".17g"), format(s.qD, ".17g")] + gev)
