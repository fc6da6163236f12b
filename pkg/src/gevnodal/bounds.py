"""Closed-form bound evaluators and calibration of the anonymous constants.

Quantities follow the proof chain of the nodal-set estimate: observability
exponent, the logarithmic necessary condition for n zeros on a chord, the
upper bound after substituting n = n0, the choice of r(t), and the covering
combination n0 / r that produces the final power of 1/t.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

INV_E = math.exp(-1.0)


@dataclass(frozen=True)
class BoundConstants:
    q0: float
    M0: float
    M1: float
    Kv: float
    Kw: float
    delta: float
    beta: float
    K: float = 1.0
    M: float = 1.0
    C0: float = math.e
    C3: float = 0.36
    Cmain: float = 1.0
    C1: float = field(init=False)
    C2: float = field(init=False)

    def __post_init__(self):
        if not 0 < self.beta <= 1:
            raise ValueError("beta must lie in (0, 1]")
        if self.C0 <= 1:
            raise ValueError("C0 must exceed 1")
        if not 0 < self.C3 <= INV_E:
            raise ValueError("C3 must lie in (0, 1/e]")
        object.__setattr__(self, "C1", self.Kw**2 + self.Kv + self.M1 + self.M0 + self.q0)
        object.__setattr__(self, "C2", self.delta ** (2 / (2 - self.beta)))

    def with_(self, **kw) -> "BoundConstants":
        kw = {k: v for k, v in kw.items() if k not in ("C1", "C2")}
        return replace(self, **kw)

    def as_dict(self) -> dict:
        return asdict(self)


def _check_t(t: float, t0: float | None = None) -> None:
    hi = INV_E if t0 is None else min(t0, INV_E)
    if not 0 < t <= hi * (1 + 1e-15):
        raise ValueError(f"t={t} outside (0, {hi:.6g}]")


def main_bound(t: float, beta: float, Cmain: float = 1.0, t0: float | None = None) -> float:
    """Cmain * (1/t)^(1/beta) * log(1/t)^(2(1/beta - 1))."""
    _check_t(t, t0)
    L = math.log(1 / t)
    return Cmain * (1 / t) ** (1 / beta) * L ** (2 * (1 / beta - 1))


def choose_r(t: float, beta: float, M: float) -> float:
    """t^(1/beta - 1) / (log(1/t)^(1/beta - 1) M), clamped to (0, 1/2]."""
    _check_t(t)
    p = 1 / beta - 1
    r = t**p / (math.log(1 / t) ** p * M)
    return min(r, 0.5)


def n0(t: float, r: float, K: float, d: int) -> int:
    if not 0 < r <= 0.5 or t <= 0:
        raise ValueError("need r in (0, 1/2] and t > 0")
    return math.floor(2 * K * K * math.log(1 / r) / t + 2 * d + 1)


def necessary_condition_lhs(n: int, r: float, t: float, bc: BoundConstants, d: int) -> float:
    """Log form of the necessary condition for n zeros on a chord; >= 0 iff n is possible."""
    if n < 1:
        raise ValueError("n must be at least 1")
    b = bc.beta
    expo = n + bc.K**2 * math.log(1 / r) / t + bc.C1 * t + bc.C2 * t ** (-b / (2 - b))
    return (expo * math.log(bc.C0)
            + (n + d / 2) * math.log(r)
            - (0.5 + n) * math.log(n)
            - n * math.log(bc.C3)
            + (n + 2 * d) / b * math.log(n + 2 * d))


def replaced_lhs_upper(n0_: int, r: float, t: float, bc: BoundConstants, d: int) -> float:
    """Upper bound for the necessary-condition value at n = n0."""
    b = bc.beta
    return ((bc.C1 * t + bc.C2 * t ** (-b / (2 - b))) * math.log(bc.C0)
            + n0_ * math.log(bc.C0**2 * r * 2 ** (1 / b) * n0_ ** (1 / b - 1) / bc.C3)
            + 2 * d / b * math.log(2 * n0_))


def stirling_holds(C3, nmax: int) -> bool:
    """Exact check of C3^n n^(n + 1/2) < n! for 1 <= n <= nmax.

    Squared to stay in integers: C3^(2n) n^(2n+1) < (n!)^2 with C3 = p/q.
    """
    c = Fraction(str(C3)) if not isinstance(C3, Fraction) else C3
    p, q = c.numerator, c.denominator
    fact = 1
    for n in range(1, nmax + 1):
        fact *= n
        if p ** (2 * n) * n ** (2 * n + 1) >= fact * fact * q ** (2 * n):
            return False
    return True


def stirling_c3_check(nmax: int = 300, resolution: int = 10**6) -> float:
    """Largest C3 on a 1/resolution grid with C3^n n^(n+1/2) < n! for all n <= nmax."""
    if not 1 <= nmax <= 300:
        raise ValueError("nmax must lie in [1, 300]")
    est = min(math.exp((math.lgamma(n + 1) - (n + 0.5) * math.log(n)) / n)
              for n in range(1, nmax + 1))
    k = math.floor(est * resolution) + 1
    while not stirling_holds(Fraction(k, resolution), nmax):
        k -= 1
    return k / resolution


def observability_exponent(mu0: float, t: float, K: float) -> float:
    """K^2 log(1/mu0) / t, the power of C in the ball observability estimate."""
    if not 0 < mu0 <= 0.5 or t <= 0:
        raise ValueError("need mu0 in (0, 1/2] and t > 0")
    return K * K * math.log(1 / mu0) / t


def beta_mu(mu: float, t: float, q0: float, M0: float, M1: float, C: float = 1.0) -> float:
    s = math.sqrt(t)
    return (C * (t * q0 + M1**2 + M1**2 * t + M0**2 * t**2 + 1 / t + 1 / s) * math.log(t / mu**2)
            + C * (M1 * s + M1**2 * t + M0 * t + 1 / t + 1 / s))


def check_mu_admissible(mu: float, mu0: float, delta0: float, t: float, C: float = 1.0, *,
                        q0: float, M0: float, M1: float) -> bool:
    if not 0 < mu < min(math.sqrt(t / 2), mu0):
        return False
    b = beta_mu(mu, t, q0, M0, M1, C)
    return 1 / mu**2 >= C / mu0**2 * math.log(1 / mu) + C * (b + 1) / delta0**2


def mu_closed_form(t: float, mu0: float, K: float) -> float:
    """mu0 sqrt(t/2) / (K log(1/mu0)^(1/2))."""
    return mu0 * math.sqrt(t / 2) / (K * math.sqrt(math.log(1 / mu0)))


def global_bound_from_covering(t: float, bc: BoundConstants, d: int) -> float:
    """n0 / r with r = choose_r(t): the covering combination before its constant."""
    r = choose_r(t, bc.beta, bc.M)
    return n0(t, r, bc.K, d) / r


def reconstruction_holds(bc: BoundConstants, t_grid: Sequence[float], d: int) -> bool:
    """True when n = n0 violates the necessary condition at every t."""
    for t in t_grid:
        r = choose_r(t, bc.beta, bc.M)
        if necessary_condition_lhs(n0(t, r, bc.K, d), r, t, bc, d) >= 0:
            return False
    return True


def bisect_M_star(bc: BoundConstants, t_grid: Sequence[float], d: int,
                  hi: float = 1e12, rtol: float = 1e-6) -> float:
    """Smallest M (to rtol) for which :func:`reconstruction_holds`, by bisection in log M.

    Assumes the predicate is monotone in M; the returned value is checked.
    """
    if reconstruction_holds(bc.with_(M=1.0), t_grid, d):
        return 1.0
    if not reconstruction_holds(bc.with_(M=hi), t_grid, d):
        raise ValueError(f"no admissible M below {hi:g}")
    lo_l, hi_l = 0.0, math.log(hi)
    while hi_l - lo_l > rtol:
        mid = 0.5 * (lo_l + hi_l)
        if reconstruction_holds(bc.with_(M=math.exp(mid)), t_grid, d):
            hi_l = mid
        else:
            lo_l = mid
    return math.exp(hi_l)


SHAPES: dict[str, Callable[[float, float], float]] = {
    "main": lambda t, beta: main_bound(t, beta, 1.0),
    "inverse_t": lambda t, beta: 1 / t,
}


@dataclass(frozen=True)
class Calibration:
    C: float
    degenerate: bool
    shape: str
    beta: float
    train_ids: tuple


def calibrate_C(pairs, bound: str | Callable = "main", beta: float = 1.0,
                ids: Sequence | None = None) -> Calibration:
    """Smallest C with value <= C * shape(t) for every training pair (t, value)."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("no calibration pairs")
    shape = SHAPES[bound] if isinstance(bound, str) else bound
    name = bound if isinstance(bound, str) else getattr(bound, "__name__", "custom")
    C = max(v / shape(t, beta) for t, v in pairs)
    degenerate = C <= 0
    if degenerate:
        C = np.nextafter(0.0, 1.0)
    ids = tuple(ids) if ids is not None else tuple(range(len(pairs)))
    return Calibration(float(C), degenerate, name, beta, ids)


def fit_log_power_law(t, y) -> tuple[float, float, float]:
    """Least squares log y = a log(1/t) + b log log(1/t) + c; returns (a, b, rms residual)."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    L = np.log(1 / t)
    X = np.stack([L, np.log(L), np.ones_like(L)], 1)
    coef, *_ = np.linalg.lstsq(X, np.log(y), rcond=None)
    res = float(np.sqrt(np.mean((X @ coef - np.log(y)) ** 2)))
    return float(coef[0]), float(coef[1]), res


def bound_report(bc: BoundConstants, t_values: Sequence[float], d: int,
                 calibration: Calibration | None = None) -> dict:
    rows = []
    for t in t_values:
        r = choose_r(t, bc.beta, bc.M)
        n = n0(t, r, bc.K, d)
        rows.append({
            "t": t,
            "r": r,
            "n0": n,
            "main_bound": main_bound(t, bc.beta, bc.Cmain),
            "covering_bound": n / r,
            "ratio_covering_to_main": (n / r) / main_bound(t, bc.beta, 1.0),
            "necessary_lhs_at_n0": necessary_condition_lhs(n, r, t, bc, d),
            "replaced_upper_at_n0": replaced_lhs_upper(n, r, t, bc, d),
            "observability_exponent": observability_exponent(r, t, bc.K),
        })
    out = {"inputs": {**bc.as_dict(), "d": d}, "rows": rows}
    if calibration is not None:
        out["calibration"] = asdict(calibration)
    return out


def write_report(path, report: dict) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, tuple):
        return list(x)
    raise TypeError(f"not serializable: {type(x)}")
