"""Experiment harness: seeded scenario generation, method sweeps, file outputs.

Every (method, M, replicate) cell derives its randomness from a
SeedSequence spawned off (experiment seed, M, replicate); the scenario
stream is method-independent so all methods in a replicate see identical
channels (paired comparison), while algorithmic randomness (random-array
positions) comes from a per-method child stream.

Outputs are delimited text: records.csv (one row per cell),
trace_<method>_<M>_<seed>.csv (per-run convergence), summary.csv
(aggregates), plus figure-data tables from emit_figures.
"""

from __future__ import annotations

import csv
import math
import time
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path as FsPath

import numpy as np

from . import objective as obj
from .baselines import fpa_solve, gdma_solve, ra_solve, sfpa_solve
from .model import ChannelScenario, DesignPoint, Path
from .objective import ObjectiveContext
from .solver import PcgdConfig, PpmConfig, SolveTrace, initial_point, ppm_solve

__all__ = [
    "METHODS",
    "ExperimentSpec",
    "ResultRecord",
    "GradcheckReport",
    "generate_scenario",
    "run_experiment",
    "gradcheck",
    "finite_difference_gradient",
    "emit_figures",
    "write_records",
    "read_records",
    "write_trace",
    "read_trace",
]

METHODS = ("ppm", "gdma", "sfpa", "fpa", "ra")

RECORD_FIELDS = (
    "method",
    "m",
    "seed",
    "secrecy_rate",
    "sigma",
    "outer_iters",
    "inner_iters",
    "wall_clock",
    "positions",
    "phases",
    "feasible",
    "error",
)

TRACE_FIELDS = ("outer_iter", "phi", "secrecy_rate", "sigma", "rho", "grad_norm")


@dataclass
class ExperimentSpec:
    """Sweep definition: physical defaults, array sizes, methods, seeds, configs."""

    wavelength: float = 0.01
    aperture_wavelengths: float = 30.0
    power: float = 1.0
    noise_b: float = 1.0
    noise_e: float = 1.0
    paths_b: int = 4
    paths_e: int = 4
    m_values: tuple = (4, 8, 16)
    methods: tuple = METHODS
    seed: int = 0
    replicates: int = 50
    seeds: tuple | None = None
    pcgd: PcgdConfig = field(default_factory=PcgdConfig)
    ppm: PpmConfig = field(default_factory=PpmConfig)
    out_dir: str | None = None

    def __post_init__(self):
        if min(self.wavelength, self.power, self.noise_b, self.noise_e) <= 0:
            raise ValueError("physical parameters must be positive")
        if self.aperture_wavelengths <= 0:
            raise ValueError("aperture must be positive")
        if self.paths_b < 1 or self.paths_e < 1:
            raise ValueError("need at least one path per side")
        self.m_values = tuple(int(m) for m in self.m_values)
        if not self.m_values:
            raise ValueError("m_values must be non-empty")
        self.methods = tuple(str(m).lower() for m in self.methods)
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r} (choose from {METHODS})")
        if self.seeds is not None:
            self.seeds = tuple(int(s) for s in self.seeds)
            if len(set(self.seeds)) != len(self.seeds):
                raise ValueError("seeds must be distinct")
        elif self.replicates < 1:
            raise ValueError("replicates must be at least 1")

    @property
    def aperture(self) -> float:
        return self.aperture_wavelengths * self.wavelength

    def seed_list(self) -> tuple:
        return self.seeds if self.seeds is not None else tuple(range(self.replicates))


@dataclass
class ResultRecord:
    """Outcome of one (method, M, seed) cell."""

    method: str
    m: int
    seed: int
    secrecy_rate: float = math.nan
    sigma: float = math.nan
    outer_iters: int = 0
    inner_iters: int = 0
    wall_clock: float = math.nan
    positions: np.ndarray | None = None
    phases: np.ndarray | None = None
    feasible: bool = False
    error: str = ""


def _cell_seeds(exp_seed: int, m: int, replicate_seed: int):
    """(scenario, algorithm) seed sequences for one cell.

    The master sequence depends only on (experiment seed, M, replicate), so
    its first child — the scenario stream — is shared by every method;
    method identity selects a later child for algorithmic randomness.
    """
    master = np.random.SeedSequence(entropy=exp_seed, spawn_key=(m, replicate_seed))
    children = master.spawn(1 + len(METHODS))
    scenario_seq = children[0]
    algo_seqs = {name: children[1 + i] for i, name in enumerate(METHODS)}
    return scenario_seq, algo_seqs


def generate_scenario(spec: ExperimentSpec, seed) -> ChannelScenario:
    """Draw a random multipath scenario: CN(0, 1/L_i) gains, uniform angles.

    Deterministic in (spec, seed): the same seed reproduces the same path
    lists bit for bit.
    """
    rng = np.random.default_rng(seed)
    m = spec.m_values[0] if len(spec.m_values) == 1 else None
    sides = []
    for n_paths in (spec.paths_b, spec.paths_e):
        angles = rng.uniform(0.0, math.pi, n_paths)
        scale = math.sqrt(0.5 / n_paths)
        gains = rng.normal(0.0, scale, n_paths) + 1j * rng.normal(0.0, scale, n_paths)
        sides.append(tuple(Path(complex(g), float(a)) for g, a in zip(gains, angles)))
    del m
    return ChannelScenario(
        wavelength=spec.wavelength,
        num_antennas=spec.m_values[0],
        aperture=spec.aperture,
        power=spec.power,
        noise_b=spec.noise_b,
        noise_e=spec.noise_e,
        paths_b=sides[0],
        paths_e=sides[1],
    )


def _run_cell(
    spec: ExperimentSpec, method: str, scenario: ChannelScenario, algo_seq
) -> tuple[DesignPoint, SolveTrace]:
    ctx = ObjectiveContext(scenario)
    if method == "ppm":
        return ppm_solve(ctx, initial_point(scenario), spec.ppm, spec.pcgd)
    if method == "gdma":
        return gdma_solve(ctx, spec.pcgd)
    if method == "sfpa":
        return sfpa_solve(ctx, spec.pcgd)
    if method == "fpa":
        return fpa_solve(ctx, spec.pcgd)
    if method == "ra":
        return ra_solve(ctx, spec.pcgd, algo_seq)
    raise ValueError(f"unknown method {method!r}")


def run_experiment(spec: ExperimentSpec) -> tuple[list[ResultRecord], dict]:
    """Execute every (method, M, seed) cell; collect records and traces.

    Failures inside a cell are caught and recorded with an error tag; the
    sweep continues. When spec.out_dir is set, writes records.csv, one
    trace file per successful cell, and summary.csv.
    """
    records: list[ResultRecord] = []
    traces: dict[tuple, SolveTrace] = {}
    for m in spec.m_values:
        for rep_seed in spec.seed_list():
            scenario_seq, algo_seqs = _cell_seeds(spec.seed, m, rep_seed)
            scenario = generate_scenario(
                replace(spec, m_values=(m,)), scenario_seq
            )
            for method in spec.methods:
                record = ResultRecord(method=method, m=m, seed=rep_seed)
                t0 = time.perf_counter()
                try:
                    point, trace = _run_cell(spec, method, scenario, algo_seqs[method])
                except Exception as exc:  # cell failure must not kill the sweep
                    record.error = f"{type(exc).__name__}: {exc}"
                    records.append(record)
                    continue
                record.wall_clock = time.perf_counter() - t0
                record.secrecy_rate = trace.rate[-1]
                record.sigma = trace.sigma[-1]
                record.outer_iters = trace.outer_iterations
                record.inner_iters = trace.total_inner_iterations
                record.positions = point.p.copy()
                record.phases = np.angle(point.w)
                record.feasible = trace.feasible
                records.append(record)
                traces[(method, m, rep_seed)] = trace

    records.sort(key=lambda r: (r.method, r.m, r.seed))
    if spec.out_dir is not None:
        out = FsPath(spec.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_records(out / "records.csv", records)
        for (method, m, seed), trace in sorted(traces.items()):
            write_trace(out / f"trace_{method}_{m}_{seed}.csv", trace)
        _write_summary(out / "summary.csv", records)
    return records, traces


def _fmt(x: float) -> str:
    return repr(float(x))


def _fmt_vector(v: np.ndarray | None) -> str:
    if v is None:
        return ""
    return ";".join(_fmt(x) for x in v)


def write_records(path, records: list[ResultRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORD_FIELDS)
        for r in records:
            writer.writerow(
                [
                    r.method,
                    r.m,
                    r.seed,
                    _fmt(r.secrecy_rate),
                    _fmt(r.sigma),
                    r.outer_iters,
                    r.inner_iters,
                    _fmt(r.wall_clock),
                    _fmt_vector(r.positions),
                    _fmt_vector(r.phases),
                    int(r.feasible),
                    r.error,
                ]
            )


def read_records(path) -> list[ResultRecord]:
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RECORD_FIELDS:
            raise ValueError(f"unexpected records header in {path}")
        for row in reader:
            records.append(
                ResultRecord(
                    method=row["method"],
                    m=int(row["m"]),
                    seed=int(row["seed"]),
                    secrecy_rate=float(row["secrecy_rate"]),
                    sigma=float(row["sigma"]),
                    outer_iters=int(row["outer_iters"]),
                    inner_iters=int(row["inner_iters"]),
                    wall_clock=float(row["wall_clock"]),
                    positions=_parse_vector(row["positions"]),
                    phases=_parse_vector(row["phases"]),
                    feasible=bool(int(row["feasible"])),
                    error=row["error"],
                )
            )
    return records


def _parse_vector(text: str) -> np.ndarray | None:
    if not text:
        return None
    return np.array([float(x) for x in text.split(";")])


def write_trace(path, trace: SolveTrace) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_FIELDS)
        for i in range(trace.outer_iterations):
            writer.writerow(
                [
                    i + 1,
                    _fmt(trace.phi[i]),
                    _fmt(trace.rate[i]),
                    _fmt(trace.sigma[i]),
                    _fmt(trace.rho[i]),
                    _fmt(trace.grad_norm[i]),
                ]
            )


def read_trace(path) -> SolveTrace:
    trace = SolveTrace()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TRACE_FIELDS:
            raise ValueError(f"unexpected trace header in {path}")
        for row in reader:
            trace.phi.append(float(row["phi"]))
            trace.rate.append(float(row["secrecy_rate"]))
            trace.rate_unclamped.append(float(row["secrecy_rate"]))
            trace.sigma.append(float(row["sigma"]))
            trace.rho.append(float(row["rho"]))
            trace.grad_norm.append(float(row["grad_norm"]))
            trace.inner_iters.append(0)
            trace.duration.append(0.0)
    return trace


def _write_summary(path, records: list[ResultRecord]) -> None:
    groups: dict[tuple, list[ResultRecord]] = {}
    for r in records:
        if not r.error:
            groups.setdefault((r.method, r.m), []).append(r)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["method", "m", "n", "mean_rate", "median_rate", "mean_sigma", "mean_outer_iters"]
        )
        for (method, m), rs in sorted(groups.items()):
            rates = np.array([r.secrecy_rate for r in rs])
            writer.writerow(
                [
                    method,
                    m,
                    len(rs),
                    _fmt(rates.mean()),
                    _fmt(np.median(rates)),
                    _fmt(np.mean([r.sigma for r in rs])),
                    _fmt(np.mean([r.outer_iters for r in rs])),
                ]
            )


# ---------------------------------------------------------------------------
# gradient checking


def finite_difference_gradient(
    ctx: ObjectiveContext, point: DesignPoint, rho: float, h: float = 1e-6
) -> np.ndarray:
    """Central-difference gradient of phi in real coordinates [Re w, Im w, p].

    Independent oracle for the analytic gradient: perturbs one real
    coordinate at a time and differences phi directly.
    """
    m = point.w.size
    out = np.empty(3 * m)
    for i in range(m):
        for k, delta in enumerate((h, 1j * h)):
            wp = point.w.copy()
            wm = point.w.copy()
            wp[i] += delta
            wm[i] -= delta
            fp = obj.phi(ctx, DesignPoint(wp, point.p), rho)
            fm = obj.phi(ctx, DesignPoint(wm, point.p), rho)
            out[i + k * m] = (fp - fm) / (2.0 * h)
    for i in range(m):
        pp = point.p.copy()
        pm = point.p.copy()
        pp[i] += h
        pm[i] -= h
        fp = obj.phi(ctx, DesignPoint(point.w, pp), rho)
        fm = obj.phi(ctx, DesignPoint(point.w, pm), rho)
        out[2 * m + i] = (fp - fm) / (2.0 * h)
    return out


@dataclass
class GradcheckReport:
    count: int
    max_rel_error: float
    max_abs_error: float
    failures: int
    passed: bool

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"gradcheck {status}: {self.count} tuples, "
            f"max relative error {self.max_rel_error:.3e}, "
            f"max absolute error {self.max_abs_error:.3e}, "
            f"{self.failures} failing components"
        )


def gradcheck(
    spec: ExperimentSpec,
    count: int,
    seed: int = 0,
    m_values: tuple = (2, 4, 8),
    rel_tol: float = 1e-6,
    abs_floor: float = 1e-8,
    gradient_fn=None,
) -> GradcheckReport:
    """Compare the analytic Euclidean gradient against central finite differences.

    Each tuple draws a random scenario, a random on-manifold point near the
    centered array, and a random penalty factor. A component passes when
    |analytic - fd| <= max(abs_floor, rel_tol * max(|analytic|, |fd|)).
    `gradient_fn` exists for fault injection in tests; it defaults to the
    production gradient.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    if gradient_fn is None:
        gradient_fn = obj.euclidean_gradient
    rng = np.random.default_rng(seed)
    max_rel = 0.0
    max_abs = 0.0
    failures = 0
    for i in range(count):
        m = int(m_values[i % len(m_values)])
        case_spec = replace(spec, m_values=(m,), out_dir=None)
        scenario = generate_scenario(case_spec, rng.integers(2**32))
        ctx = ObjectiveContext(scenario)
        w = np.exp(1j * rng.uniform(0.0, 2.0 * math.pi, m))
        base = initial_point(scenario).p
        p = base + rng.normal(0.0, 2.0 * scenario.wavelength, m)
        point = DesignPoint(w, p)
        rho = float(rng.uniform(0.5, 5.0))

        gw, gp = gradient_fn(ctx, point, rho)
        analytic = np.concatenate([2.0 * gw.real, 2.0 * gw.imag, gp])
        fd = finite_difference_gradient(ctx, point, rho)
        diff = np.abs(analytic - fd)
        scale = np.maximum(np.abs(analytic), np.abs(fd))
        tol = np.maximum(abs_floor, rel_tol * scale)
        bad = diff > tol
        failures += int(np.count_nonzero(bad))
        max_abs = max(max_abs, float(diff.max()))
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.where(scale > 0, diff / scale, 0.0)
        max_rel = max(max_rel, float(rel.max()))
    return GradcheckReport(
        count=count,
        max_rel_error=max_rel,
        max_abs_error=max_abs,
        failures=failures,
        passed=failures == 0,
    )


# ---------------------------------------------------------------------------
# figure data


def emit_figures(records: list[ResultRecord], traces: dict, out_dir) -> list:
    """Write figure-data tables derived from a finished sweep.

    Emits (a) one convergence table per array size from the lowest-seed
    penalty-manifold trace, (b) mean secrecy rate versus array size per
    method, and (c) final antenna positions per (method, M). Returns the
    written paths; empty input is a warning no-op.
    """
    if not records:
        warnings.warn("emit_figures called with no records; nothing written")
        return []
    out = FsPath(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    ppm_keys = sorted(k for k in traces if k[0] == "ppm")
    for m in sorted({k[1] for k in ppm_keys}):
        key = min(k for k in ppm_keys if k[1] == m)
        trace = traces[key]
        path = out / f"convergence_m{m}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["outer_iter", "secrecy_rate", "sigma"])
            for i in range(trace.outer_iterations):
                writer.writerow([i + 1, _fmt(trace.rate[i]), _fmt(trace.sigma[i])])
        written.append(path)

    ok = [r for r in records if not r.error]
    path = out / "rate_vs_m.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "m", "n", "mean_rate", "median_rate"])
        groups: dict[tuple, list[float]] = {}
        for r in ok:
            groups.setdefault((r.method, r.m), []).append(r.secrecy_rate)
        for (method, m), rates in sorted(groups.items()):
            arr = np.array(rates)
            writer.writerow(
                [method, m, arr.size, _fmt(arr.mean()), _fmt(np.median(arr))]
            )
    written.append(path)

    for (method, m) in sorted({(r.method, r.m) for r in ok if r.positions is not None}):
        path = out / f"positions_{method}_{m}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["seed"] + [f"p{i + 1}" for i in range(m)])
            for r in ok:
                if r.method == method and r.m == m and r.positions is not None:
                    writer.writerow([r.seed] + [_fmt(x) for x in r.positions])
        written.append(path)
    return written
