"""End-to-end experiments: synthesize, solve, measure, certify, bound, calibrate, fit."""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bounds as B
from .certify import LineSeries, Segment, certify_zero_bound, segment_sign_changes, write_certificates_csv
from .coeffs import GevreyParams, check_time_horizon, make_coefficients, synth_coefficients, zero_coefficients
from .errors import ConfigError, SweepPointError
from .fourier import TWO_PI, SpectralField, mode_indices
from .nodal import (
    NodalCurve2D,
    hausdorff_line_estimate,
    make_probe_set,
    max_line_intersections,
    nodal_length_2d,
    write_nodal_csv,
    zeros_1d,
)
from .solver import SolverConfig, solve, write_diagnostics_csv

U0_RECIPES = ("flat", "sin3", "cosx", "cosx_cosy", "sin1_sin2")


RUNTIME_FIELDS = ("workers", "output_dir")


@dataclass
class ExperimentConfig:
    seed: int = 0
    dim: int = 1
    J: int = 64
    beta: float = 1.0
    delta: float = 0.1
    margin: float = 2.0
    amplitude: float = 0.2
    coeff_J: int = 8
    coefficients: str = "synth"  # synth | zero
    u0: str = "flat"
    dt: float = 0.0  # 0 -> min(1e-3, 0.45 / (M1 J + M0))
    t_min: float = 5e-3
    t_max: float = math.exp(-1)
    points_per_decade: int = 8
    t_grid: tuple = ()
    calib_t_min: float = 0.0  # 0 -> calibrate on the upper half of the grid
    oversample: int = 16
    resolution: int = 256
    angles: int = 64
    cert_radius: float = 0.25
    cert_angles: int = 4
    nmax: int = 200
    K: float = 1.0
    M: float = 0.0  # 0 -> bisected M*
    C0: float = math.e
    C3: float = 0.36
    horizon_C: float = 2.0
    workers: int = 1
    output_dir: str = "out"

    def __post_init__(self):
        if isinstance(self.t_grid, str):
            self.t_grid = tuple(float(x) for x in self.t_grid.split(",") if x.strip())
        self.t_grid = tuple(float(x) for x in self.t_grid)
        if self.dim not in (1, 2):
            raise ConfigError("dim must be 1 or 2")
        if self.coefficients not in ("synth", "zero"):
            raise ConfigError("coefficients must be 'synth' or 'zero'")
        if self.u0 not in U0_RECIPES:
            raise ConfigError(f"u0 must be one of {U0_RECIPES}")

    def times(self) -> np.ndarray:
        if self.t_grid:
            t = np.array(self.t_grid)
        else:
            if not 0 < self.t_min < self.t_max:
                raise ConfigError("need 0 < t_min < t_max")
            n = max(2, round(math.log10(self.t_max / self.t_min) * self.points_per_decade) + 1)
            t = np.geomspace(self.t_min, self.t_max, n)
        if len(t) == 0:
            raise ConfigError("empty t grid")
        if np.any(t <= 0) or np.any(np.diff(t) <= 0):
            raise ConfigError("t grid must be positive and strictly increasing")
        if t[-1] > math.exp(-1) * (1 + 1e-12):
            raise ConfigError("t grid must stay within (0, 1/e]")
        return t

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(repr(float(x)) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name}={v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        kw = {}
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                k, v = line.split("=", 1)
                kw[k.strip()] = v.strip()
        return cls.from_strings(kw)

    @classmethod
    def from_strings(cls, kw: dict) -> "ExperimentConfig":
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        out = {}
        for k, v in kw.items():
            if k not in types:
                raise ConfigError(f"unknown config key {k!r}")
            tp = types[k]
            if not isinstance(v, str):
                out[k] = v
            elif tp == "int":
                out[k] = int(v)
            elif tp == "float":
                out[k] = float(v)
            else:
                out[k] = v
        return cls(**out)

    def canonical_text(self) -> str:
        """Config text without fields that cannot change results."""
        keep = [ln for ln in self.to_text().splitlines(keepends=True)
                if ln.split("=", 1)[0] not in RUNTIME_FIELDS]
        return "".join(keep)

    def content_hash(self) -> str:
        """Git blob hash of the canonical config text."""
        data = self.canonical_text().encode()
        return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def make_u0(cfg: ExperimentConfig) -> SpectralField:
    d, J = cfg.dim, cfg.J
    if cfg.u0 == "sin3":
        modes = {3: -0.5j, -3: 0.5j} if d == 1 else {(3, 0): -0.5j, (-3, 0): 0.5j}
        return SpectralField.from_modes(d, max(J, 3), modes)
    if cfg.u0 == "cosx":
        modes = {1: 0.5, -1: 0.5} if d == 1 else {(1, 0): 0.5, (-1, 0): 0.5}
        return SpectralField.from_modes(d, max(J, 1), modes)
    if cfg.u0 == "cosx_cosy":
        if d != 2:
            raise ConfigError("cosx_cosy needs dim=2")
        return SpectralField.from_modes(2, max(J, 1), {(1, 0): .5, (-1, 0): .5, (0, 1): .5, (0, -1): .5})
    if cfg.u0 == "sin1_sin2":
        if d != 1:
            raise ConfigError("sin1_sin2 needs dim=1")
        return SpectralField.from_modes(1, max(J, 2), {1: -.5j, -1: .5j, 2: -.5j, -2: .5j})
    return flat_spectrum(cfg.seed, d, J)


def flat_spectrum(seed: int, dim: int, J: int) -> SpectralField:
    """Unit-modulus amplitudes with random phases for all |j|_inf <= J."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 7919]))
    shape = (2 * J + 1,) * dim
    ph = np.exp(1j * rng.uniform(0, TWO_PI, shape))
    ks = mode_indices(dim, J)
    pos = ks[0] > 0 if dim == 1 else (ks[0] > 0) | ((ks[0] == 0) & (ks[1] > 0))
    c = np.where(pos, ph, np.conj(ph[(slice(None, None, -1),) * dim]))
    c[(J,) * dim] = 1.0 if rng.uniform() < 0.5 else -1.0
    return SpectralField(c)


def make_coeffs(cfg: ExperimentConfig):
    params = GevreyParams(cfg.beta, cfg.delta)
    if cfg.coefficients == "zero":
        return zero_coefficients(cfg.dim, params)
    return synth_coefficients(cfg.seed, cfg.dim, cfg.coeff_J, params, cfg.margin, cfg.amplitude)


def auto_dt(coeffs, J: int) -> float:
    return min(1e-3, 0.45 / (coeffs.M1 * J + coeffs.M0))


def bisect_M(cfg: ExperimentConfig, bc: B.BoundConstants, t: np.ndarray) -> float:
    if cfg.M > 0:
        return cfg.M
    grid = np.geomspace(min(1e-3, t[0]), math.exp(-1), 30)
    return B.bisect_M_star(bc, grid, cfg.dim)


@dataclass
class FitResult:
    which: str
    a: float
    b: float
    residual: float
    n_points: int


@dataclass
class SweepResult:
    config: ExperimentConfig
    config_hash: str
    rows: list
    certificates: list
    calibration: B.Calibration
    train_t: list
    test_t: list
    dominance_violations: list
    certificate_violations: list
    constants: B.BoundConstants
    horizon_ok: bool
    record: object = field(repr=False, default=None)
    fits: dict = field(default_factory=dict)

    @property
    def dominance_holds(self) -> bool:
        return not self.dominance_violations

    @property
    def hard_invariants_hold(self) -> bool:
        return not self.certificate_violations

    def measured(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.array([r["t"] for r in self.rows]), np.array([r["value"] for r in self.rows]))


def _measure(u: SpectralField, cfg: ExperimentConfig, probes) -> dict:
    if u.dim == 1:
        z = zeros_1d(u, cfg.oversample)
        z2 = zeros_1d(u, 2 * cfg.oversample)
        return {"method": "zero_count", "resolution": cfg.oversample * u.J,
                "value": float(z.count), "refined_value": float(z2.count),
                "n_line_max": z.count, "suspects": len(z.suspects)}
    curve = nodal_length_2d(u, max(cfg.resolution, 4 * u.J))
    return {"method": "contour_length", "resolution": curve.N, "value": curve.total_length,
            "refined_value": curve.refined_length,
            "n_line_max": max_line_intersections(curve, probes, cfg.angles), "suspects": 0}


def _certify(u: SpectralField, cfg: ExperimentConfig, probes, r: float) -> list:
    """Certificates on chords of B_{2r}(center) through each probe point."""
    out = []
    center = np.asarray(probes.center)
    if u.dim == 1:
        series = LineSeries.from_field(u)
        seg = Segment(float(center[0]), min(2 * r, math.pi))
        cert = certify_zero_bound(series, seg, cfg.nmax)
        out.append((center, 0.0, r, cert, segment_sign_changes(series, seg)))
        return out
    for q in probes.points:
        for m in range(cfg.cert_angles):
            th = math.pi * (m + 0.5) / cfg.cert_angles
            e = np.array([math.cos(th), math.sin(th)])
            off = center - q
            s0 = float(off @ e)
            perp2 = float(off @ off) - s0 * s0
            hw = math.sqrt(max(4 * r * r - perp2, 0.0))
            if hw <= 0:
                continue
            series = LineSeries.from_line(u, q, th)
            seg = Segment(s0, min(hw, math.pi))
            cert = certify_zero_bound(series, seg, cfg.nmax)
            out.append((q, th, r, cert, segment_sign_changes(series, seg)))
    return out


def run_sweep(cfg: ExperimentConfig) -> SweepResult:
    """Solve once along the t grid and measure, certify and bound every snapshot.

    Cmain is calibrated on the large-t half of the grid (or t >= calib_t_min)
    and dominance is checked only on the disjoint small-t part.
    """
    t = cfg.times()
    coeffs = make_coeffs(cfg)
    u0 = make_u0(cfg)
    dt = cfg.dt if cfg.dt > 0 else auto_dt(coeffs, cfg.J)
    dt = min(dt, float(np.min(np.diff(np.concatenate([[0.0], t])))))
    rec = solve(u0, coeffs, SolverConfig(dt, float(t[-1]), tuple(t), None,
                                         ((cfg.delta, cfg.beta),)))
    bc = B.BoundConstants(q0=rec.q0, M0=coeffs.M0, M1=coeffs.M1, Kv=coeffs.Kv, Kw=coeffs.Kw,
                          delta=cfg.delta, beta=cfg.beta, K=cfg.K, C0=cfg.C0, C3=cfg.C3)
    bc = bc.with_(M=bisect_M(cfg, bc, t))
    center = (math.pi,) * cfg.dim
    probes = make_probe_set(center, 0.5 if cfg.dim == 2 else cfg.cert_radius)

    def work(snap):
        try:
            r = cfg.cert_radius if cfg.cert_radius > 0 else B.choose_r(snap.t, cfg.beta, bc.M)
            return _measure(snap.u, cfg, probes), _certify(snap.u, cfg, probes, r)
        except Exception as exc:
            raise SweepPointError(snap.t, cfg.seed, exc) from exc

    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as ex:
            results = list(ex.map(work, rec.snapshots))
    else:
        results = [work(s) for s in rec.snapshots]

    rows, certs, cert_viol = [], [], []
    for snap, (meas, cl) in zip(rec.snapshots, results):
        row = {"t": snap.t, **meas,
               "main_shape": B.main_bound(snap.t, cfg.beta, 1.0),
               "covering_bound": B.global_bound_from_covering(snap.t, bc, cfg.dim)}
        rows.append(row)
        for q, th, r, cert, scan in cl:
            certs.append({"t": snap.t, "p": q, "theta": th, "r": r, "cert": cert, "scan": scan})
            if cert is not None and scan >= cert.nstar:
                cert_viol.append((snap.t, th))

    if cfg.calib_t_min > 0:
        train = [r for r in rows if r["t"] >= cfg.calib_t_min]
        test = [r for r in rows if r["t"] < cfg.calib_t_min]
    else:
        half = len(rows) // 2
        test, train = rows[:half], rows[half:]
    if not train:
        raise ConfigError("calibration split left no training points")
    cal = B.calibrate_C([(r["t"], r["value"]) for r in train], "main", cfg.beta,
                        ids=[f"t={r['t']:.6g}" for r in train])
    viol = []
    for r in rows:
        r["main_bound"] = cal.C * r["main_shape"]
        r["split"] = "train" if r in train else "test"
    for r in test:
        if r["value"] > r["main_bound"]:
            viol.append(r["t"])
    horizon = check_time_horizon(float(t[-1]), coeffs.M1, cfg.horizon_C)
    res = SweepResult(cfg, cfg.content_hash(), rows, certs, cal, [r["t"] for r in train],
                      [r["t"] for r in test], viol, cert_viol, bc.with_(Cmain=cal.C), horizon, rec)
    for which in ("measurement", "main_bound", "covering_bound"):
        try:
            res.fits[which] = fit_scaling(res, which)
        except ValueError:
            pass
    return res


def fit_scaling(result, which: str = "measurement", with_log: bool = True) -> FitResult:
    """Fit log y = a log(1/t) + b log log(1/t) + c (b fixed to 0 unless ``with_log``)."""
    if isinstance(result, SweepResult):
        key = {"measurement": "value", "main_bound": "main_bound",
               "covering_bound": "covering_bound"}[which]
        t = np.array([r["t"] for r in result.rows])
        y = np.array([r[key] for r in result.rows], dtype=float)
    else:
        t, y = (np.asarray(a, dtype=float) for a in result)
    keep = y > 0
    t, y = t[keep], y[keep]
    if len(t) < 5:
        raise ValueError(f"need at least 5 positive points, got {len(t)}")
    if math.log10(t.max() / t.min()) < 1.5 - 1e-9:
        raise ValueError("t points must span at least 1.5 decades")
    if np.any(t >= 1):
        raise ValueError("t must lie below 1")
    if with_log:
        a, b, res = B.fit_log_power_law(t, y)
    else:
        X = np.stack([np.log(1 / t), np.ones_like(t)], 1)
        coef, *_ = np.linalg.lstsq(X, np.log(y), rcond=None)
        a, b = float(coef[0]), 0.0
        res = float(np.sqrt(np.mean((X @ coef - np.log(y)) ** 2)))
    return FitResult(which, a, b, res, len(t))


def _hash_rows(path: Path, h: str) -> None:
    """Append a config_hash column to a CSV file."""
    rows = list(csv.reader(path.open()))
    rows[0].append("config_hash")
    for r in rows[1:]:
        r.append(h)
    with path.open("w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)


def sweep_summary(res: SweepResult) -> dict:
    cal = res.calibration
    return {
        "config_hash": res.config_hash,
        "calibration": {"Cmain": cal.C, "degenerate": cal.degenerate, "shape": cal.shape,
                        "train_ids": list(cal.train_ids)},
        "split": {"train_t": res.train_t, "test_t": res.test_t},
        "dominance": {"holds": res.dominance_holds, "violations_t": res.dominance_violations},
        "certificates": {"count": len(res.certificates),
                         "inconclusive": sum(c["cert"] is None for c in res.certificates),
                         "violations": [list(v) for v in res.certificate_violations]},
        "fits": {k: dataclasses.asdict(v) for k, v in sorted(res.fits.items())},
        "horizon_ok": res.horizon_ok,
        "q0": res.record.q0 if res.record is not None else None,
        "M_star": res.constants.M,
    }


def write_sweep(res: SweepResult, out: str | Path | None = None) -> Path:
    out = Path(out or res.config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    h = res.config_hash
    (out / "config.txt").write_text(res.config.to_text())
    write_diagnostics_csv(out / "diagnostics.csv", res.record)
    _hash_rows(out / "diagnostics.csv", h)
    write_nodal_csv(out / "nodal.csv", res.rows)
    _hash_rows(out / "nodal.csv", h)
    write_certificates_csv(out / "certificates.csv",
                           [(c["p"], c["theta"], c["r"], c["cert"]) for c in res.certificates])
    _hash_rows(out / "certificates.csv", h)
    rep = B.bound_report(res.constants, [r["t"] for r in res.rows], res.config.dim, res.calibration)
    rep["config_hash"] = h
    for row, r in zip(rep["rows"], res.rows):
        row["measured"] = r["value"]
        row["split"] = r["split"]
        row["config_hash"] = h
    B.write_report(out / "bounds.json", rep)
    B.write_report(out / "report.json", sweep_summary(res))
    return out


# --- verification suite -----------------------------------------------------

def _item(passed: bool, **details) -> dict:
    return {"passed": bool(passed), **details}


def check_heat_exactness(dt: float = 1e-3) -> dict:
    """Pure heat is exact; u_t = Lap u + u tests the explicit part at step dt."""
    from .coeffs import CoefficientSet
    from .fourier import l2_norm
    u0 = SpectralField.from_modes(1, 3, {3: -0.5j, -3: 0.5j})
    params = GevreyParams(1.0, 0.1)
    try:
        rec = solve(u0, zero_coefficients(1, params), SolverConfig(dt, 0.1, (0.1,)))
        heat_err = abs(rec.snapshots[0].l2 / (math.sqrt(math.pi) * math.exp(-0.9)) - 1)
        one = SpectralField.from_modes(1, 1, {0: 1.0})
        cs = make_coefficients(one, (SpectralField.zeros(1, 1),), params)
        rec = solve(u0, cs, SolverConfig(dt, 0.1, (0.1,)))
        exact = math.exp(-0.8) * 0.5
        pert_err = abs(rec.snapshots[0].u[3] - (-0.5j * math.exp(-0.8))) / exact
    except ConfigError as exc:
        return _item(False, error=str(exc))
    return _item(heat_err <= 1e-10 and pert_err <= 1e-8, heat_rel_err=heat_err,
                 perturbed_rel_err=pert_err)


def check_lower_bound(seeds=range(3), dim: int = 1) -> dict:
    from .solver import verify_lower_bound
    worst = math.inf
    ok = True
    for s in seeds:
        cfg = ExperimentConfig(seed=s, dim=dim, J=16, amplitude=0.3)
        cs = make_coeffs(cfg)
        dt = 0.4 / (cs.M1 * cfg.J + cs.M0)
        t = tuple(np.geomspace(0.02, 0.3, 6))
        rec = solve(flat_spectrum(s, dim, cfg.J), cs, SolverConfig(min(dt, 0.02), 0.3, t))
        rep = verify_lower_bound(rec, cs.M0, cs.M1, rec.q0)
        ok &= rep.passed
        worst = min(worst, min(rep.margins))
    return _item(ok, min_log_margin=worst)


def check_gevrey_smoothing(J: int = 64, delta: float = 0.1) -> dict:
    """Pure heat, flat spectrum: log-ratio vs the integer-max oracle, and its t exponent."""
    from .solver import heat_semigroup_gevrey_max
    t = np.geomspace(1e-3, 1e-1, 9)
    u0 = flat_spectrum(0, 1, J)
    rec = solve(u0, zero_coefficients(1), SolverConfig(5e-4, 0.1, tuple(t), None, ((delta, 1.0),)))
    g = np.array([s.gevrey[(delta, 1.0)] - math.log(s.l2) for s in rec.snapshots])
    oracle = np.array([heat_semigroup_gevrey_max(s.t, delta, 1.0, J) for s in rec.snapshots])
    gap = float(np.max(np.abs(g - oracle)))
    slope = float(np.polyfit(np.log(1 / t), np.log(g), 1)[0])
    target = 1.0  # beta / (2 - beta) at beta = 1
    return _item(gap <= math.log(4 * J + 1) and abs(slope - target) <= 0.1, max_gap=gap,
                 slack=math.log(4 * J + 1), slope=slope, slope_target=target)


def random_chord_ensemble(k: int, R: float, rng) -> np.ndarray:
    """k pairwise disjoint chords of B_R as segments (k, 2, 2).

    Endpoints are 2k sorted random angles joined by a random non-crossing
    matching (a random balanced bracket word).
    """
    ang = np.sort(rng.uniform(0, TWO_PI, 2 * k))
    stack, pairs, opens = [], [], 0
    for i in range(2 * k):
        remaining = 2 * k - i
        can_open = opens < k
        must_close = len(stack) == remaining
        if can_open and not must_close and (not stack or rng.uniform() < 0.5):
            stack.append(i)
            opens += 1
        else:
            pairs.append((stack.pop(), i))
    pts = R * np.stack([np.cos(ang), np.sin(ang)], 1)
    return np.array([[pts[a], pts[b]] for a, b in pairs])


def chord_study(n_ensembles: int = 200, kmax: int = 50, angles: int = 256, seed: int = 0):
    """(total length, sampled max line crossings) for random chord ensembles in B_2."""
    rng = np.random.default_rng(seed)
    probes = make_probe_set((0.0, 0.0), 1.0)
    out = []
    for _ in range(n_ensembles):
        k = int(rng.integers(1, kmax + 1))
        segs = random_chord_ensemble(k, 2.0, rng)
        curve = NodalCurve2D(segs, 0, periodic=False)
        out.append((curve.total_length, max_line_intersections(curve, probes, angles, reach=2.0)))
    return out


def check_chord_calibration(n_ensembles: int = 200, seed: int = 0) -> dict:
    data = chord_study(n_ensembles, seed=seed)
    half = n_ensembles // 2
    C = max(L / n for L, n in data[:half])
    viol = sum(L > hausdorff_line_estimate(n, 1.0, 2, C) for L, n in data[half:])
    return _item(viol == 0, C=C, violations=int(viol), n_train=half, n_test=n_ensembles - half)


def check_stirling() -> dict:
    c3 = B.stirling_c3_check(300)
    mono = all(B.stirling_c3_check(n) >= B.stirling_c3_check(n + 25) for n in range(25, 276, 25))
    return _item(B.stirling_holds(0.36, 300) and mono and c3 >= math.exp(-1), c3_max=c3)


def check_certifier(pairs: int = 100, seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    viol = incon = 0
    for _ in range(pairs):
        J = int(rng.integers(1, 33))
        c = rng.standard_normal(2 * J + 1) + 1j * rng.standard_normal(2 * J + 1)
        f = SpectralField(0.5 * (c + np.conj(c[::-1])))
        seg = Segment(rng.uniform(0, TWO_PI), rng.uniform(0.005, 0.5))
        cert = certify_zero_bound(f, seg)
        if cert is None:
            incon += 1
        elif segment_sign_changes(f, seg) >= cert.nstar:
            viol += 1
    return _item(viol == 0, violations=viol, inconclusive=incon, pairs=pairs)


def verify_suite(cfg: ExperimentConfig | None = None) -> dict:
    """Per-item pass/fail; only the heat check consumes ``cfg.dt``."""
    cfg = cfg or ExperimentConfig()
    items = {
        "heat_exactness": lambda: check_heat_exactness(cfg.dt if cfg.dt > 0 else 1e-3),
        "lower_bound": check_lower_bound,
        "gevrey_smoothing": check_gevrey_smoothing,
        "chord_calibration": check_chord_calibration,
        "stirling": check_stirling,
        "certifier_soundness": check_certifier,
    }
    report = {}
    for name, fn in items.items():
        try:
            report[name] = fn()
        except Exception as exc:  # failures are data here
            report[name] = _item(False, error=f"{type(exc).__name__}: {exc}")
    return {"config_hash": cfg.content_hash(), "items": report,
            "all_passed": all(v["passed"] for v in report.values())}


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=B._jsonable) + "\n")


def timed(fn, *a, **kw):
    t0 = time.perf_counter()
    out = fn(*a, **kw)
    return out, time.perf_counter() - t0
