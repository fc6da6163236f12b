"""Nodal-set measurement: 1D zero counts, 2D contour length, line probes, local L2 ratios."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import EffectiveVanishingError, ResolutionError, ZeroFieldError
from .fourier import TWO_PI, SpectralField, evaluate, l2_norm, sobolev_linf_bound, synthesize

SUSPECT_RTOL = 1e-8
# irrational fraction of a grid cell; keeps sample points off rational zeros like k*pi/3
_GRID_PHASE = math.sqrt(2.0) - 1.0


@dataclass(frozen=True, eq=False)
class NodalSet1D:
    zeros: np.ndarray
    tol: float
    suspects: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def count(self) -> int:
        return len(self.zeros)


@dataclass(frozen=True, eq=False)
class NodalCurve2D:
    segments: np.ndarray  # (K, 2, 2): segment k runs from segments[k, 0] to segments[k, 1]
    N: int
    periodic: bool = True
    refined_length: float | None = None  # same measurement at 2N

    @property
    def total_length(self) -> float:
        if len(self.segments) == 0:
            return 0.0
        return float(np.sum(np.linalg.norm(self.segments[:, 1] - self.segments[:, 0], axis=1)))

    @property
    def richardson(self) -> tuple[float, float | None]:
        return self.total_length, self.refined_length


def _sample_1d(f: SpectralField, M: int, phase: float) -> np.ndarray:
    k = np.arange(-f.J, f.J + 1)
    return synthesize(f.coeffs * np.exp(1j * k * phase), M).real


def zeros_1d(f: SpectralField, oversample: int = 16, tol: float = 1e-12) -> NodalSet1D:
    """Sign-change zeros of a 1D field, each refined by bisection to ``tol``.

    Sampling uses an oversample*J point grid shifted by an irrational
    fraction of a cell.  Grid minima of |u| below 1e-8 * sup without a sign
    change are returned as ``suspects`` (possible tangential zeros), not
    counted.
    """
    if f.dim != 1:
        raise ValueError("zeros_1d needs a 1D field")
    if f.is_zero():
        raise ZeroFieldError("nodal set of the zero field is the whole circle")
    M = max(oversample * max(f.J, 1), 2 * f.J + 2)
    h = TWO_PI / M
    phase = _GRID_PHASE * h
    x = phase + h * np.arange(M)
    v = _sample_1d(f, M, phase)
    bound = sobolev_linf_bound(f)
    s = np.sign(np.where(np.abs(v) <= 1e-14 * bound, 0.0, v))

    nxt = np.roll(s, -1)
    brk = np.nonzero(s * nxt < 0)[0]
    exact = []
    for k in np.nonzero(s == 0)[0]:
        left, right = s[k - 1], s[(k + 1) % M]
        if left * right < 0:
            exact.append(x[k])

    a = x[brk]
    b = a + h
    fa = v[brk]
    while len(a) and float(np.max(b - a)) > tol:
        m = 0.5 * (a + b)
        fm = evaluate(f, m)
        left = np.sign(fm) == np.sign(fa)
        a = np.where(left, m, a)
        fa = np.where(left, fm, fa)
        b = np.where(left, b, m)
    roots = np.concatenate([0.5 * (a + b), np.array(exact)]) % TWO_PI
    roots = np.where(roots > TWO_PI - tol, roots - TWO_PI, roots)
    roots.sort()

    # tangential candidates: sign-quiet local minima of |u| that could dip to zero
    # between samples (|u| <= |u''| h^2 / 2 away from the minimizer)
    prv, av = np.roll(s, 1), np.abs(v)
    quiet = (s != 0) & (prv == s) & (nxt == s)
    local_min = (av <= np.roll(av, 1)) & (av <= np.roll(av, -1))
    curv = float(np.sum(np.arange(-f.J, f.J + 1) ** 2 * np.abs(f.coeffs)))
    cand = np.nonzero(quiet & local_min & (av <= 0.5 * curv * h * h + SUSPECT_RTOL * bound))[0]
    sus, pairs = [], []
    for k in cand:
        sk = s[k]
        res = minimize_scalar(lambda y: sk * float(evaluate(f, np.array([y]))[0]),
                              bounds=(x[k] - h, x[k] + h), method="bounded",
                              options={"xatol": 1e-12})
        if res.fun < -SUSPECT_RTOL * bound:
            # a dip through zero between samples: two genuine crossings
            pairs += [_bisect(f, x[k] - h, res.x, tol), _bisect(f, res.x, x[k] + h, tol)]
        elif res.fun < SUSPECT_RTOL * bound:
            sus.append(res.x % TWO_PI)
    if pairs:
        roots = np.concatenate([roots, np.array(pairs) % TWO_PI])
        roots = np.where(roots > TWO_PI - tol, roots - TWO_PI, roots)
        roots.sort()
        roots = roots[np.concatenate([[True], np.diff(roots) > tol])]
    return NodalSet1D(roots, tol, np.sort(np.array(sus)))


def _bisect(f: SpectralField, a: float, b: float, tol: float) -> float:
    """Sign-change root of f in [a, b] to width tol."""
    fa = float(evaluate(f, np.array([a]))[0])
    while b - a > tol:
        m = 0.5 * (a + b)
        fm = float(evaluate(f, np.array([m]))[0])
        if np.sign(fm) == np.sign(fa):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def dense_sign_scan(f: SpectralField, points: int = 1_000_000) -> int:
    """Brute-force count of sign changes over a uniform periodic sample."""
    if points < 2 * f.J + 2:
        raise ResolutionError(f"{points} samples cannot resolve cutoff {f.J}")
    v = _sample_1d(f, points, _GRID_PHASE * TWO_PI / points)
    s = np.sign(v)
    s = s[s != 0]
    return int(np.sum(s != np.roll(s, 1)))


def _marching_squares(V: np.ndarray) -> np.ndarray:
    """Zero-contour segments of a periodic grid in index units."""
    N = V.shape[0]
    a = V
    b = np.roll(V, -1, axis=0)
    c = np.roll(np.roll(V, -1, axis=0), -1, axis=1)
    d = np.roll(V, -1, axis=1)
    I, Jy = np.meshgrid(np.arange(N, dtype=float), np.arange(N, dtype=float), indexing="ij")
    pos = [a > 0, b > 0, c > 0, d > 0]
    cross = [pos[0] != pos[1], pos[1] != pos[2], pos[3] != pos[2], pos[0] != pos[3]]
    with np.errstate(divide="ignore", invalid="ignore"):
        pts = [
            np.stack([I + a / (a - b), Jy], -1),
            np.stack([I + 1, Jy + b / (b - c)], -1),
            np.stack([I + d / (d - c), Jy + 1], -1),
            np.stack([I, Jy + a / (a - d)], -1),
        ]
    n = sum(x.astype(int) for x in cross)
    segs = []
    two = n == 2
    if two.any():
        order = np.argsort(~np.stack(cross, -1)[two], axis=-1, kind="stable")[:, :2]
        P = np.stack(pts, -2)[two]  # (K, 4, 2)
        rows = np.arange(P.shape[0])
        segs.append(np.stack([P[rows, order[:, 0]], P[rows, order[:, 1]]], 1))
    four = n == 4
    if four.any():
        centre_pos = (a + b + c + d)[four] > 0
        P = [p[four] for p in pts]
        ac = centre_pos == pos[0][four]
        # centre shares a's sign: cut off corners b and d; otherwise a and c
        s1 = np.where(ac[:, None], P[0], P[3])
        e1 = np.where(ac[:, None], P[1], P[0])
        s2 = np.where(ac[:, None], P[2], P[1])
        e2 = np.where(ac[:, None], P[3], P[2])
        segs.append(np.stack([s1, e1], 1))
        segs.append(np.stack([s2, e2], 1))
    if not segs:
        return np.empty((0, 2, 2))
    return np.concatenate(segs, 0)


def contour_segments(f: SpectralField, N: int) -> np.ndarray:
    V = synthesize(f.coeffs, N).real
    scale = float(np.max(np.abs(V)))
    if scale == 0:
        raise ZeroFieldError("nodal set of the zero field is the whole torus")
    eps = 1e-12 * scale
    # exact-zero samples get a fixed tiny sign so the contour passes through them once
    V = np.where(np.abs(V) < eps, eps, V)
    return _marching_squares(V) * (TWO_PI / N)


def nodal_length_2d(f: SpectralField, N: int, refine: bool = True) -> NodalCurve2D:
    """Marching-squares nodal curve with linear edge interpolation.

    Saddle cells are split by the sign of the cell-centre average.  With
    ``refine`` the length at 2N is stored as ``refined_length``.
    """
    if f.dim != 2:
        raise ValueError("nodal_length_2d needs a 2D field")
    if N < 4 * f.J:
        raise ResolutionError(f"N={N} below 4J={4 * f.J}")
    segs = contour_segments(f, N)
    refined = None
    if refine:
        s2 = contour_segments(f, 2 * N)
        refined = float(np.sum(np.linalg.norm(s2[:, 1] - s2[:, 0], axis=1))) if len(s2) else 0.0
    return NodalCurve2D(segs, N, True, refined)


def line_restriction(f: SpectralField, p, theta: float, halflen: float, samples: int):
    """(s, u(p + s e_theta)) for s uniformly spaced on [-halflen, halflen]."""
    s = np.linspace(-halflen, halflen, samples)
    p = np.asarray(p, dtype=float)
    e = np.array([math.cos(theta), math.sin(theta)])
    return s, evaluate(f, p[None, :] + s[:, None] * e[None, :])


@dataclass(frozen=True)
class ProbePointSet:
    center: tuple[float, ...]
    r: float
    points: np.ndarray  # rows ordered p_{+1}, p_{-1}, ..., p_{+d}, p_{-d}

    @property
    def dim(self) -> int:
        return len(self.center)


def make_probe_set(center, r: float, jitter: float = 0.0, seed: int | None = None) -> ProbePointSet:
    """p_{+-k} = center +- r e_k, each moved by less than r/(10d) when jitter > 0."""
    c = np.asarray(center, dtype=float)
    d = len(c)
    if not 0 <= jitter < 1:
        raise ValueError("jitter must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    pts = []
    for k in range(d):
        for sgn in (1.0, -1.0):
            q = c.copy()
            q[k] += sgn * r
            if jitter:
                u = rng.standard_normal(d)
                u *= jitter * rng.uniform() * r / (10 * d) / np.linalg.norm(u)
                q = q + u
            pts.append(q)
    return ProbePointSet(tuple(c), float(r), np.array(pts))


def _wrap_segments(segs: np.ndarray, center: np.ndarray) -> np.ndarray:
    mid = 0.5 * (segs[:, 0] + segs[:, 1])
    shift = TWO_PI * np.round((mid - center) / TWO_PI)
    return segs - shift[:, None, :]


def line_crossings(segs: np.ndarray, p, angles: np.ndarray, center, reach: float) -> np.ndarray:
    """Crossings of each line through p (directions ``angles``) within |x - center| <= reach."""
    A = segs[:, 0] - np.asarray(p)
    B = segs[:, 1] - np.asarray(p)
    out = np.zeros(len(angles), dtype=int)
    cen = np.asarray(center) - np.asarray(p)
    for m, phi in enumerate(angles):
        nrm = np.array([-math.sin(phi), math.cos(phi)])
        sa, sb = A @ nrm, B @ nrm
        hit = (sa > 0) != (sb > 0)
        if not hit.any():
            continue
        lam = sa[hit] / (sa[hit] - sb[hit])
        X = A[hit] + lam[:, None] * (B[hit] - A[hit])
        out[m] = int(np.sum(np.linalg.norm(X - cen, axis=1) <= reach))
    return out


def max_line_intersections(curve: NodalCurve2D, probes: ProbePointSet, angles: int = 64,
                           reach: float | None = None) -> int:
    """Largest crossing count over lines through the probe points.

    Lines are restricted to the chord of B_{2r}(center) unless ``reach`` is
    given.  A sampled maximum, hence a lower bound for the true count.
    """
    if angles < 64:
        raise ValueError("at least 64 angles required")
    if len(curve.segments) == 0:
        return 0
    center = np.asarray(probes.center)
    segs = _wrap_segments(curve.segments, center) if curve.periodic else curve.segments
    reach = 2 * probes.r if reach is None else reach
    phis = math.pi * np.arange(angles) / angles
    return max(int(line_crossings(segs, p, phis, center, reach).max()) for p in probes.points)


def hausdorff_line_estimate(n: int, r: float, d: int, C: float) -> float:
    """C n r^(d-1): measure of a set in B_2r met at most n times by probe lines."""
    return C * n * r ** (d - 1)


@dataclass(frozen=True)
class LocalRatio:
    value: float
    refined: float  # same quadrature at 2N


def _ball_mass(f: SpectralField, p, r: float, N: int) -> float:
    p = np.asarray(p, dtype=float).reshape(-1)
    if f.dim == 1:
        h = 2 * r / N
        x = p[0] - r + h * (np.arange(N) + 0.5)
        return float(np.sum(evaluate(f, x) ** 2) * h)
    dr, dth = r / N, TWO_PI / N
    rho = dr * (np.arange(N) + 0.5)
    th = dth * (np.arange(N) + 0.5)
    R, T = np.meshgrid(rho, th, indexing="ij")
    pts = np.stack([p[0] + R * np.cos(T), p[1] + R * np.sin(T)], -1)
    return float(np.sum(evaluate(f, pts) ** 2 * R) * dr * dth)


def local_l2_ratio(f: SpectralField, p, r: float, N: int = 256) -> LocalRatio:
    """||u||^2 over T^d divided by ||u||^2 over B_r(p).

    The ball integral is a midpoint rule on N nodes in 1D and on an N x N
    polar grid in 2D (exact for constants).
    """
    if not 0 < r <= 1:
        raise ValueError("r must lie in (0, 1]")
    total = l2_norm(f) ** 2
    out = []
    for n in (N, 2 * N):
        m = _ball_mass(f, p, r, n)
        if m < 1e-300:
            raise EffectiveVanishingError(f"ball mass {m:.3e} at r={r}")
        out.append(total / m)
    return LocalRatio(out[0], out[1])


def observability_trend(f: SpectralField, t: float, p, radii=(0.5, 0.25, 0.125, 0.0625),
                        N: int = 256) -> tuple[float, float, float]:
    """Fit log(local ratio) = a * log(1/r) / t + b; returns (a, b, rms residual)."""
    radii = np.asarray(radii, dtype=float)
    y = np.array([math.log(local_l2_ratio(f, p, r, N).value) for r in radii])
    X = np.stack([np.log(1 / radii) / t, np.ones_like(radii)], 1)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    res = float(np.sqrt(np.mean((X @ coef - y) ** 2)))
    return float(coef[0]), float(coef[1]), res


def write_nodal_csv(path, rows) -> None:
    """rows: dicts with t, method, resolution, value, refined_value, n_line_max."""
    cols = ["t", "method", "resolution", "value", "refined_value", "n_line_max"]
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(cols)
        for r in rows:
            wr.writerow([_fmt(r.get(c, "")) for c in cols])


def write_polyline(path, curve: NodalCurve2D) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["x1", "y1", "x2", "y2"])
        for s in curve.segments:
            wr.writerow([format(float(v), ".17g") for v in s.reshape(-1)])


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".17g")
    return "" if v is None else v
