"""Experiment orchestration and bound checks.

Every trial draws from its own counter-based stream,
``RngStream(master_seed, hash(cell_id) ^ trial)``, and writes into a slot
indexed by trial number; statistics are reduced sequentially afterwards.
Output is therefore identical for any worker count.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .coeffs import RngStream, parse_law, stream_index_for
from .gaf import ZeroCountMismatch, gaf_zeros, sample_gaf
from .kacsim import LocalFrame, local_roots, sample_kac_counted
from .kpoint import battery_descriptor, estimate_values, phi_battery, t_phi
from .polyroots import aberth_roots

__all__ = [
    "DEFAULT_LAWS",
    "ExperimentConfig",
    "ExperimentResult",
    "ResultRow",
    "config_to_json",
    "emit_report",
    "fmt",
    "gap_sigma",
    "max_modulus_samples",
    "max_modulus_stat",
    "moment_tail_scan",
    "parse_config",
    "read_correlations",
    "rows_from_correlations",
    "run_experiment",
    "small_ball_probe",
    "write_csv",
]

log = logging.getLogger(__name__)

DEFAULT_LAWS = ("gaussian-complex", "gaussian-real", "rademacher", "uniform-real", "two-point(0.2)")
WORKERS_ENV = "KACLAB_WORKERS"
FAILURE_LIMIT = 0.01
STREAM_SCHEME = "philox4x64(key=(master_seed, blake2b8(cell_id) ^ trial)); v1"


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    laws: list = field(default_factory=lambda: list(DEFAULT_LAWS))
    degrees: list = field(default_factory=lambda: [128, 512])
    theta: float = math.pi / 2
    window_R: float = 4.0
    ks: list = field(default_factory=lambda: [1, 2])
    trials_per_cell: int = 5000
    gaf_trials: int = 10000
    tol: float = 1e-10
    master_seed: int = 20240601
    workers: int = 1


class ConfigError(ValueError):
    pass


def _check_int(path, v, lo=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{path}: expected integer, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigError(f"{path}: must be >= {lo}, got {v}")
    return v


def _check_num(path, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}: expected number, got {v!r}")
    return float(v)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a JSON experiment config; missing keys take defaults."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    cfg = ExperimentConfig()
    known = set(asdict(cfg))
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")

    if "laws" in doc:
        if not isinstance(doc["laws"], list) or not doc["laws"]:
            raise ConfigError("laws: expected a nonempty list")
        for i, name in enumerate(doc["laws"]):
            try:
                parse_law(name)
            except (ValueError, AttributeError) as exc:
                raise ConfigError(f"laws[{i}]: {exc}") from exc
        cfg.laws = list(doc["laws"])
    if "degrees" in doc:
        if not isinstance(doc["degrees"], list) or not doc["degrees"]:
            raise ConfigError("degrees: expected a nonempty list")
        cfg.degrees = [_check_int(f"degrees[{i}]", v, 1) for i, v in enumerate(doc["degrees"])]
    if "ks" in doc:
        if not isinstance(doc["ks"], list) or not doc["ks"]:
            raise ConfigError("ks: expected a nonempty list")
        cfg.ks = [_check_int(f"ks[{i}]", v, 1) for i, v in enumerate(doc["ks"])]
    for key in ("theta", "window_R", "tol"):
        if key in doc:
            setattr(cfg, key, _check_num(key, doc[key]))
    for key in ("trials_per_cell", "gaf_trials", "master_seed", "workers"):
        if key in doc:
            setattr(cfg, key, _check_int(key, doc[key]))

    if not 0.1 < cfg.theta < math.pi - 0.1:
        raise ConfigError(f"theta: {cfg.theta} outside (0.1, pi - 0.1)")
    if cfg.window_R < 1:
        raise ConfigError(f"window_R: must be >= 1, got {cfg.window_R}")
    for i, k in enumerate(cfg.ks):
        if k > 3:
            raise ConfigError(f"ks[{i}]: k={k} exceeds 3")
    for key in ("trials_per_cell", "gaf_trials"):
        if getattr(cfg, key) < 100:
            raise ConfigError(f"{key}: must be >= 100, got {getattr(cfg, key)}")
    if cfg.tol <= 0:
        raise ConfigError("tol: must be positive")
    if not 0 <= cfg.master_seed < 2**64:
        raise ConfigError("master_seed: must fit in 64 unsigned bits")
    if cfg.workers < 1:
        raise ConfigError("workers: must be >= 1")
    return cfg


def config_to_json(cfg: ExperimentConfig) -> str:
    return json.dumps(asdict(cfg), indent=2, sort_keys=True)


def resolve_workers(hint: int | None = None) -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return max(1, int(hint or 1))


# ---------------------------------------------------------------------------
# formatting


def fmt(x) -> str:
    """Locale-independent text for CSV cells; floats carry 17 significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    return str(x)


def write_csv(path, header, rows, comment: dict | None = None) -> None:
    buf = io.StringIO()
    if comment is not None:
        buf.write("# " + json.dumps(comment, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def csv_body(path) -> str:
    """File content without ``#`` header lines (what determinism is judged on)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines(keepends=True)
    return "".join(line for line in lines if not line.startswith("#"))


# ---------------------------------------------------------------------------
# trials


@dataclass(frozen=True)
class CellSpec:
    cell_id: str
    law: str  # law name, or "GAF"
    n: int  # 0 for the GAF cell
    theta: float
    window_R: float
    tol: float
    master_seed: int
    ks: tuple


@dataclass
class TrialResult:
    ok: bool
    points: np.ndarray  # local zeros within window_R + 1
    tvals: tuple
    count: int  # zeros in the closed disk of radius window_R
    draws: int
    iterations: int
    error: str = ""


def kac_cell(law: str, n: int, theta: float, window_R: float, master_seed: int, ks=(), tol: float = 1e-10):
    law_name = parse_law(law).name
    cell_id = f"kac|{law_name}|n={n}|theta={theta!r}|R={window_R!r}"
    return CellSpec(cell_id, law_name, int(n), float(theta), float(window_R), float(tol), int(master_seed), tuple(ks))


def gaf_cell(theta: float, window_R: float, tol: float, master_seed: int, ks=()):
    cell_id = f"gaf|R={window_R!r}|tol={tol!r}"
    return CellSpec(cell_id, "GAF", 0, float(theta), float(window_R), float(tol), int(master_seed), tuple(ks))


def _battery(spec: CellSpec):
    return [phi for k in spec.ks for phi in phi_battery(k, spec.window_R)]


def _run_chunk(spec: CellSpec, start: int, stop: int) -> list[TrialResult]:
    phis = _battery(spec)
    solver_R = spec.window_R + 1.0
    out = []
    if spec.law != "GAF":
        law = parse_law(spec.law)
        frame = LocalFrame(spec.theta, spec.n)
    for t in range(start, stop):
        stream = RngStream(spec.master_seed, stream_index_for(spec.cell_id, t))
        try:
            if spec.law == "GAF":
                sample = sample_gaf(stream, solver_R, spec.tol)
                config = gaf_zeros(sample, solver_R)
                draws, iters = sample.trunc_N + 1, 0
            else:
                poly, rejected = sample_kac_counted(law, frame, stream)
                draws = (spec.n + 1) * (rejected + 1)
                rep = aberth_roots(poly, seed=int(stream.generator.integers(0, 2**63)))
                iters = rep.iterations
                if not rep.converged:
                    out.append(TrialResult(False, np.zeros(0, complex), (), 0, draws, iters, "no convergence"))
                    continue
                config = local_roots(rep, frame, solver_R)
        except (ZeroCountMismatch, RuntimeError) as exc:
            out.append(TrialResult(False, np.zeros(0, complex), (), 0, 0, 0, str(exc)))
            continue
        tv = tuple(t_phi(config, phi) for phi in phis)
        count = int(np.count_nonzero(np.abs(config.points) <= spec.window_R))
        out.append(TrialResult(True, config.points, tv, count, draws, iters))
    return out


def _chunk_bounds(trials: int, workers: int) -> list[tuple[int, int]]:
    size = max(1, min(250, -(-trials // (4 * workers))))
    return [(a, min(a + size, trials)) for a in range(0, trials, size)]


def run_cell(spec: CellSpec, trials: int, workers: int = 1) -> list[TrialResult]:
    """Run ``trials`` trials of a cell; result ``i`` always belongs to trial ``i``."""
    bounds = _chunk_bounds(trials, workers)
    if workers <= 1:
        chunks = [_run_chunk(spec, a, b) for a, b in bounds]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(_run_chunk, spec, a, b) for a, b in bounds]
            chunks = [f.result() for f in futs]
    return [r for chunk in chunks for r in chunk]


# ---------------------------------------------------------------------------
# rows and gaps


@dataclass
class ResultRow:
    law: str
    n: int | str
    k: int
    phi_id: str
    mean: float
    stderr: float
    trials: int
    gaf_mean: float = math.nan
    gaf_stderr: float = math.nan
    gap: float = math.nan
    gap_sigma: float = math.nan
    status: str = "ok"

    HEADER = ("law", "n", "k", "phi_id", "mean", "stderr", "trials", "gaf_mean", "gaf_stderr", "gap", "gap_sigma", "status")

    def as_tuple(self):
        return tuple(getattr(self, h) for h in self.HEADER)


def gap_sigma(m1: float, s1: float, m2: float, s2: float) -> float:
    """``|m1 - m2| / sqrt(s1^2 + s2^2)``; ``inf`` for a nonzero gap with zero error."""
    den = math.hypot(s1, s2)
    gap = abs(m1 - m2)
    if den == 0:
        return 0.0 if gap == 0 else math.inf
    return gap / den


@dataclass
class CellResult:
    spec: CellSpec
    trials: list
    failures: int
    voided: bool
    estimates: dict  # phi_id -> CorrelationEstimate

    @property
    def ok_trials(self):
        return [t for t in self.trials if t.ok]


def summarize_cell(spec: CellSpec, results: list[TrialResult]) -> CellResult:
    phis = _battery(spec)
    good = [r for r in results if r.ok]
    failures = len(results) - len(good)
    voided = failures > FAILURE_LIMIT * len(results) or len(good) < 2
    est = {}
    if not voided:
        n_label = "GAF" if spec.law == "GAF" else spec.n
        for j, phi in enumerate(phis):
            est[phi.phi_id] = estimate_values(
                [r.tvals[j] for r in good], k=phi.k, phi_id=phi.phi_id, law_id=spec.law, n=n_label
            )
    return CellResult(spec, results, failures, voided, est)


def correlation_rows(cells: list[CellResult]) -> list[tuple]:
    rows = []
    for cell in cells:
        n_label = "GAF" if cell.spec.law == "GAF" else cell.spec.n
        for phi in _battery(cell.spec):
            if cell.voided:
                rows.append((cell.spec.law, n_label, phi.k, phi.phi_id, math.nan, math.nan, 0))
                continue
            e = cell.estimates[phi.phi_id]
            rows.append((e.law_id, n_label, e.k, e.phi_id, e.mean, e.stderr, e.trials))
    return rows


def rows_from_correlations(corr_rows) -> tuple[list[ResultRow], list[tuple]]:
    """Gap-to-GAF rows and law-pair gap rows from ``law,n,k,phi_id,mean,stderr,trials`` tuples."""
    gaf = {r[3]: r for r in corr_rows if r[0] == "GAF"}
    rows = []
    for law, n, k, phi_id, mean, se, trials in corr_rows:
        if law == "GAF":
            continue
        row = ResultRow(law, n, int(k), phi_id, float(mean), float(se), int(trials))
        if math.isnan(row.mean):
            row.status = "voided"
        if phi_id in gaf:
            g = gaf[phi_id]
            row.gaf_mean, row.gaf_stderr = float(g[4]), float(g[5])
            if row.status == "ok" and not math.isnan(row.gaf_mean):
                row.gap = row.mean - row.gaf_mean
                row.gap_sigma = gap_sigma(row.mean, row.stderr, row.gaf_mean, row.gaf_stderr)
        rows.append(row)
    pairs = []
    by_cell = {}
    for r in rows:
        by_cell.setdefault((r.n, r.phi_id), []).append(r)
    for (n, phi_id), group in by_cell.items():
        for i in range(len(group)):
            for j in range(i + 1, len(group)):
                a, b = group[i], group[j]
                if a.status != "ok" or b.status != "ok":
                    continue
                pairs.append(
                    (a.law, b.law, n, a.k, phi_id, a.mean - b.mean, math.hypot(a.stderr, b.stderr),
                     gap_sigma(a.mean, a.stderr, b.mean, b.stderr))
                )
    return rows, pairs


PAIR_HEADER = ("law_a", "law_b", "n", "k", "phi_id", "gap", "gap_stderr", "gap_sigma")
CORR_HEADER = ("law", "n", "k", "phi_id", "mean", "stderr", "trials")


def emit_report(rows: list[ResultRow], out_dir, *, manifest: dict | None = None, pairs=None) -> list[Path]:
    """Write the gap table, per-figure plot data and a JSON manifest.

    Plot files hold ``x,y,yerr`` with ``x = n``, ``y`` the gap to the GAF
    baseline and ``yerr`` its combined standard error, sorted by ``x``.
    """
    if not rows:
        raise ValueError("no rows to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    path = out / "gaps.csv"
    write_csv(path, ResultRow.HEADER, [r.as_tuple() for r in rows])
    written.append(path)
    if pairs is not None:
        path = out / "pair_gaps.csv"
        write_csv(path, PAIR_HEADER, pairs)
        written.append(path)
    plots = out / "plots"
    plots.mkdir(exist_ok=True)
    series = {}
    for r in rows:
        if isinstance(r.n, str) or r.status != "ok":
            continue
        series.setdefault((r.law, r.phi_id), []).append(
            (int(r.n), r.gap, math.hypot(r.stderr, r.gaf_stderr) if not math.isnan(r.gaf_stderr) else r.stderr)
        )
    for (law, phi_id), pts in sorted(series.items()):
        path = plots / f"gap_{_slug(law)}_{phi_id}.csv"
        write_csv(path, ("x", "y", "yerr"), sorted(pts))
        written.append(path)
    if manifest is not None:
        path = out / "manifest.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
        written.append(path)
    return written


def _slug(s: str) -> str:
    return "".join(ch if ch.isalnum() or ch in ".-" else "_" for ch in s)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    cells: list
    rows: list
    pairs: list
    correlations: list
    budget: dict


def run_experiment(config: ExperimentConfig, out_dir=None) -> ExperimentResult:
    """Run every ``(law, n)`` cell and the GAF baseline; optionally write all artifacts."""
    t0 = time.time()
    workers = resolve_workers(config.workers)
    ks = tuple(sorted(set(config.ks)))
    specs = [
        kac_cell(law, n, config.theta, config.window_R, config.master_seed, ks, config.tol)
        for law in config.laws
        for n in config.degrees
    ]
    specs.append(gaf_cell(config.theta, config.window_R, config.tol, config.master_seed, ks))
    cells = []
    for spec in specs:
        trials = config.gaf_trials if spec.law == "GAF" else config.trials_per_cell
        log.info("running %s (%d trials)", spec.cell_id, trials)
        cell = summarize_cell(spec, run_cell(spec, trials, workers))
        if cell.voided:
            log.warning("cell %s voided: %d failures", spec.cell_id, cell.failures)
        cells.append(cell)
    corr = correlation_rows(cells)
    rows, pairs = rows_from_correlations(corr)

    expected = sum(config.trials_per_cell * (s.n + 1) for s in specs if s.law != "GAF")
    drawn = sum(t.draws for c in cells if c.spec.law != "GAF" for t in c.trials)
    budget = {
        "expected_coefficient_draws": expected,
        "coefficient_draws": drawn,
        "balanced": expected == drawn,
        "failures": {c.spec.cell_id: c.failures for c in cells},
    }
    result = ExperimentResult(config, cells, rows, pairs, corr, budget)
    if out_dir is not None:
        _write_experiment(result, Path(out_dir), time.time() - t0)
    return result


def _write_experiment(res: ExperimentResult, out: Path, wall: float) -> None:
    out.mkdir(parents=True, exist_ok=True)
    cfg = res.config
    roots_dir = out / "scaled_roots"
    roots_dir.mkdir(exist_ok=True)
    for cell in res.cells:
        spec = cell.spec
        header = {"theta": spec.theta, "window_R": spec.window_R, "solver_window": spec.window_R + 1,
                  "cell_id": spec.cell_id, "master_seed": spec.master_seed}
        if spec.law == "GAF":
            header.update(tol=spec.tol)
            rows = [(t, z.real, z.imag) for t, tr in enumerate(cell.trials) if tr.ok for z in tr.points]
            write_csv(out / "gaf_zeros.csv", ("trial", "z_re", "z_im"), rows, header)
        else:
            header.update(n=spec.n, law=spec.law)
            rows = [
                (t, spec.law, spec.n, spec.theta, w.real, w.imag)
                for t, tr in enumerate(cell.trials) if tr.ok for w in tr.points
            ]
            write_csv(roots_dir / f"{_slug(spec.law)}_n{spec.n}.csv",
                      ("trial", "law", "n", "theta", "w_re", "w_im"), rows, header)
    values_dir = out / "trial_values"
    values_dir.mkdir(exist_ok=True)
    for cell in res.cells:
        spec = cell.spec
        n_label = "GAF" if spec.law == "GAF" else spec.n
        phis = _battery(spec)
        rows = [
            (t, spec.law, n_label, phi.phi_id, tr.tvals[j])
            for j, phi in enumerate(phis) for t, tr in enumerate(cell.trials) if tr.ok
        ]
        name = "GAF" if spec.law == "GAF" else f"{_slug(spec.law)}_n{spec.n}"
        write_csv(values_dir / f"{name}.csv", ("trial", "law", "n", "phi_id", "value"), rows)
    write_csv(out / "correlations.csv", CORR_HEADER, res.correlations)
    count_rows = []
    for cell in res.cells:
        counts = np.array([t.count for t in cell.ok_trials], dtype=float)
        if counts.size >= 2:
            for power in (1, 2):
                v = counts**power
                count_rows.append((cell.spec.law, "GAF" if cell.spec.law == "GAF" else cell.spec.n, cfg.window_R, power,
                                   math.fsum(v) / v.size, float(np.std(v, ddof=1) / math.sqrt(v.size)), v.size))
    write_csv(out / "disk_counts.csv", ("law", "n", "R", "power", "mean", "stderr", "trials"), count_rows)
    (out / "battery.json").write_text(battery_descriptor(tuple(sorted(set(cfg.ks))), cfg.window_R) + "\n",
                                      encoding="utf-8")
    emit_report(res.rows, out, pairs=res.pairs, manifest=build_manifest(cfg, wall, res.budget))


def build_manifest(cfg: ExperimentConfig, wall: float, budget: dict | None = None) -> dict:
    import numba
    import scipy

    return {
        "config": asdict(cfg),
        "master_seed": cfg.master_seed,
        "stream_scheme": STREAM_SCHEME,
        "versions": {"kaclab": __version__, "python": platform.python_version(), "numpy": np.__version__,
                     "scipy": scipy.__version__, "numba": numba.__version__},
        "wall_clock_seconds": wall,
        "budget": budget or {},
    }


def read_correlations(path) -> list[tuple]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for rec in csv.DictReader(line for line in fh if not line.startswith("#")):
            n = rec["n"] if rec["n"] == "GAF" else int(rec["n"])
            rows.append((rec["law"], n, int(rec["k"]), rec["phi_id"], float(rec["mean"]), float(rec["stderr"]),
                         int(rec["trials"])))
    return rows


# ---------------------------------------------------------------------------
# bound checks


def _frame_powers(n: int, theta: float, z: np.ndarray) -> np.ndarray:
    # rows: evaluation points; columns: u^k / sqrt(n), u = zeta0 (1 + z / n)
    u = np.exp(1j * theta) * (1.0 + np.asarray(z, dtype=np.complex128) / n)
    k = np.arange(n + 1)
    return np.exp(np.log(u)[:, None] * k[None, :]) / math.sqrt(n)


def _coefficient_matrix(law, n: int, cell_id: str, master_seed: int, trials: int) -> np.ndarray:
    out = np.empty((trials, n + 1), dtype=np.complex128)
    for t in range(trials):
        out[t] = law.draw(RngStream(master_seed, stream_index_for(cell_id, t)).generator, n + 1)
    return out


def max_modulus_samples(law, n: int, R: float, trials: int, seed: int, *, theta: float = math.pi / 2,
                        boundary_points: int = 512, radial_points: int = 0) -> np.ndarray:
    """Per-trial ``max |F_n|`` over ``boundary_points`` equispaced points of ``|z| = R``.

    ``radial_points > 0`` adds that many interior circles at the same angles
    (a dense-disk grid used as a maximum-modulus sanity check).
    """
    if R < 1:
        raise ValueError("the bound is stated for R >= 1")
    law = parse_law(law) if isinstance(law, str) else law
    cell_id = f"maxmod|{law.name}|n={n}|R={R!r}|theta={theta!r}"
    C = _coefficient_matrix(law, n, cell_id, seed, trials)
    ang = np.exp(2j * math.pi * np.arange(boundary_points) / boundary_points)
    radii = [R] + [R * j / (radial_points + 1) for j in range(1, radial_points + 1)]
    pts = np.concatenate([r * ang for r in radii] + ([np.zeros(1)] if radial_points else []))
    V = _frame_powers(n, theta, pts)
    best = np.zeros(trials)
    for a in range(0, trials, 2000):
        vals = np.abs(C[a:a + 2000] @ V.T)
        best[a:a + 2000] = vals.max(axis=1)
    return best


def max_modulus_stat(law, n: int, R: float, trials: int, seed: int, *, theta: float = math.pi / 2,
                     boundary_points: int = 512) -> tuple[float, float]:
    """Mean and standard error of ``max_{|z| <= R} |F_n(z)|`` (boundary maximum)."""
    m = max_modulus_samples(law, n, R, trials, seed, theta=theta, boundary_points=boundary_points)
    return float(m.mean()), float(m.std(ddof=1) / math.sqrt(m.size))


@dataclass
class MomentRow:
    n: int | str
    mean: float
    stderr: float
    trials: int
    max_count: int


def moment_tail_scan(law, k: int, R: float, degrees, trials: int, seed: int, *, gaf_trials: int | None = None,
                     theta: float = math.pi / 2, tol: float = 1e-10, workers: int = 1) -> list[MomentRow]:
    """Empirical ``E[Z_n(D_R)^k]`` per degree plus a final GAF reference row."""
    if not 1 <= k <= 4:
        raise ValueError("moment order must be in 1..4")
    law_name = parse_law(law).name if isinstance(law, str) else law.name
    workers = resolve_workers(workers)
    specs = [kac_cell(law_name, n, theta, R, seed, (), tol) for n in degrees]
    specs.append(gaf_cell(theta, R, tol, seed))
    out = []
    for spec in specs:
        count = gaf_trials or trials if spec.law == "GAF" else trials
        res = run_cell(spec, count, workers)
        good = [r.count for r in res if r.ok]
        if len(res) - len(good) > FAILURE_LIMIT * len(res):
            out.append(MomentRow(spec.n or "GAF", math.nan, math.nan, len(good), 0))
            continue
        v = np.asarray(good, dtype=float) ** k
        out.append(MomentRow("GAF" if spec.law == "GAF" else spec.n, math.fsum(v) / v.size,
                             float(np.std(v, ddof=1) / math.sqrt(v.size)), v.size, int(max(good))))
    return out


@dataclass
class SmallBallRow:
    n: int
    threshold: float
    hits: int
    trials: int
    p: float
    stderr: float


@dataclass
class SmallBallReport:
    law: str
    phi: float
    rows: list
    ratios: list  # (n, 2n or next n, threshold, ratio, stderr)
    flag: str = ""


def small_ball_hits(law, n: int, phi: float, trials: int, seed: int, thresholds=(1.0,), *,
                    theta: float = math.pi / 2, block: int = 10000) -> np.ndarray:
    """Counts of ``|sqrt(n) F_n(i phi)| <= threshold`` for each threshold.

    Streams are assigned per block of ``block`` trials.
    """
    law = parse_law(law) if isinstance(law, str) else law
    cell_id = f"smallball|{law.name}|n={n}|phi={phi!r}|theta={theta!r}"
    v = _frame_powers(n, theta, np.array([1j * phi]))[0] * math.sqrt(n)
    thr = np.asarray(thresholds, dtype=float)
    hits = np.zeros(thr.size, dtype=np.int64)
    for b, a in enumerate(range(0, trials, block)):
        size = min(block, trials - a)
        gen = RngStream(seed, stream_index_for(cell_id, b)).generator
        vals = np.abs(law.draw(gen, (size, n + 1)) @ v)
        hits += (vals[:, None] <= thr[None, :]).sum(axis=0)
    return hits


def small_ball_probe(law, degrees, phi: float, trials: int, seed: int, *, thresholds=(1.0,),
                     theta: float = math.pi / 2) -> SmallBallReport:
    """Empirical ``P(sqrt(n) |F_n(i phi)| <= threshold)`` with binomial errors.

    Ratios compare consecutive degrees; for ``n^{-1}`` decay a doubling of
    ``n`` halves the probability.
    """
    if trials < 10**6:
        raise ValueError("small-ball probabilities are O(1/n); use at least 10**6 trials")
    law = parse_law(law) if isinstance(law, str) else law
    rows = []
    for n in degrees:
        hits = small_ball_hits(law, n, phi, trials, seed, thresholds, theta=theta)
        for thr, h in zip(thresholds, hits):
            p = h / trials
            rows.append(SmallBallRow(n, float(thr), int(h), trials, p, math.sqrt(p * (1 - p) / trials)))
    ratios = []
    for thr in thresholds:
        sub = [r for r in rows if r.threshold == thr]
        for a, b in zip(sub[:-1], sub[1:]):
            if a.hits and b.hits:
                ratio = a.p / b.p
                se = ratio * math.hypot(a.stderr / a.p, b.stderr / b.p)
                ratios.append((a.n, b.n, float(thr), ratio, se))
    flag = ""
    largest = max(degrees)
    if any(r.hits == 0 for r in rows if r.n == largest):
        flag = "zero hits at the largest degree: trial budget insufficient"
    return SmallBallReport(law.name, phi, rows, ratios, flag)
