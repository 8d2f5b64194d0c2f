"""Monte Carlo error-decay experiments, slope fits and report files.

One sensing matrix ``Phi0`` with ``max(m_grid)`` rows is drawn per seed and
every experiment point uses its first m rows.  Signals (and noise vectors)
are drawn once per trial and reused across m and r, so the curves for
different m differ only through the added measurements.

Work is split into (m, r) items; each item builds one
:class:`~sdcs.decode.DecodeContext` and runs every trial.  Items are
independent and their results are reassembled in grid order, so the output
does not depend on the number of worker processes.
"""

from __future__ import annotations

import enum
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from .decode import (ConstraintNorm, DecodeContext, DecodeProblem, SolverConfig,
                     constraint_residuals, decode_onestage)
from .measure import gen_compressible, gen_matrix, gen_noise, gen_sparse
from .quantize import ONE_BIT, QuantizerSpec, sigma_delta

log = logging.getLogger(__name__)

PLATEAU_REL = 0.01
OPT = "opt"


class Scenario(str, enum.Enum):
    SPARSE = "SparseDecay"
    ONEBIT = "OneBit"
    COMPRESSIBLE = "Compressible"
    NOISE = "NoiseRobust"
    ROOTEXP = "RootExp"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        for s in cls:
            if s.value.lower() == str(value).lower():
                return s
        raise ValueError(f"unknown scenario {value!r}; expected one of {[s.value for s in cls]}")


def log_grid(l_min=0, l_max=10):
    """m = floor(10**(2 + l/10)) for l = l_min..l_max."""
    return tuple(int(math.floor(10 ** (2 + 0.1 * l) + 1e-9)) for l in range(l_min, l_max + 1))


_DEFAULTS = {
    Scenario.SPARSE: dict(N=512, k=10, delta=0.01, r_list=(1, 2), m_grid=log_grid(0, 10),
                          trials=100, radius=1.0),
    Scenario.ONEBIT: dict(N=256, k=5, delta=2.0, r_list=(1, 2), m_grid=log_grid(7, 15),
                          trials=100, radius=0.15, mu=0.6),
    Scenario.COMPRESSIBLE: dict(N=512, k=10, delta=0.01, r_list=(1, 2), m_grid=log_grid(0, 10),
                                trials=100, p=0.5),
    Scenario.NOISE: dict(N=512, k=10, delta=0.01, r_list=(1, 2), m_grid=log_grid(0, 10),
                         trials=100, radius=1.0, eps=2e-3),
    Scenario.ROOTEXP: dict(N=512, k=5, delta=0.01, r_list=(1, 2, 3, 4, 5), m_grid=log_grid(0, 6),
                           trials=50, radius=1.0),
}


@dataclass(frozen=True)
class ExperimentSpec:
    """One figure-style experiment.

    ``mu`` bounds ``||Phi x + eta||_inf`` for sizing the greedy alphabet (or
    designing the one-bit filter); ``dist`` is the matrix distribution.
    """

    scenario: Scenario
    N: int
    k: int
    delta: float
    r_list: tuple
    m_grid: tuple
    trials: int
    radius: float = 1.0
    eps: float = 0.0
    p: float = 0.5
    seed: int = 0
    mu: float = 6.0
    dist: str = "gaussian"

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario.parse(self.scenario))
        object.__setattr__(self, "r_list", tuple(int(r) for r in self.r_list))
        object.__setattr__(self, "m_grid", tuple(int(m) for m in self.m_grid))
        if not self.m_grid or any(b <= a for a, b in zip(self.m_grid, self.m_grid[1:])):
            raise ValueError(f"m_grid must be non-empty and strictly increasing, got {self.m_grid}")
        if self.m_grid[0] < 1:
            raise ValueError("m_grid entries must be positive")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.r_list or min(self.r_list) < 1:
            raise ValueError("r_list must hold orders >= 1")
        if self.N < 1 or not 1 <= self.k <= self.N:
            raise ValueError(f"need 1 <= k <= N, got k={self.k}, N={self.N}")
        if self.eps < 0 or self.delta <= 0 or self.radius <= 0:
            raise ValueError("eps must be >= 0; delta and radius must be positive")
        if self.scenario is Scenario.NOISE and self.eps <= 0:
            raise ValueError("NoiseRobust needs eps > 0")
        if self.scenario is Scenario.COMPRESSIBLE and not 0 < self.p < 1:
            raise ValueError("Compressible needs 0 < p < 1")

    @classmethod
    def default(cls, scenario, **overrides):
        scenario = Scenario.parse(scenario)
        kw = dict(_DEFAULTS[scenario])
        kw.update(overrides)
        return cls(scenario=scenario, **kw)

    @property
    def one_bit(self):
        return self.scenario is Scenario.ONEBIT

    @property
    def constraint_norm(self):
        return ConstraintNorm.LINFBOX if self.one_bit else ConstraintNorm.L2BALL

    @property
    def rule(self):
        return "filtered" if self.one_bit else "greedy"

    @property
    def aggregate(self):
        """The per-m statistic the scenario is judged on."""
        return "mean" if self.scenario is Scenario.ROOTEXP else "worst"


def load_spec(path, **overrides) -> ExperimentSpec:
    """Read a flat TOML spec file; unknown keys are errors."""
    import tomli

    with open(path, "rb") as fh:
        raw = tomli.load(fh)
    return spec_from_mapping(raw, **overrides)


def spec_from_mapping(raw, **overrides) -> ExperimentSpec:
    known = {f.name for f in fields(ExperimentSpec)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ValueError(f"unknown spec keys {unknown}; allowed: {sorted(known)}")
    nested = [k for k, v in raw.items() if isinstance(v, dict)]
    if nested:
        raise ValueError(f"spec files are flat; tables not allowed: {nested}")
    if "scenario" not in raw:
        raise ValueError("spec needs a 'scenario' key")
    kw = {k: v for k, v in raw.items() if k != "scenario"}
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentSpec.default(raw["scenario"], **kw)


def spec_to_toml(spec: ExperimentSpec) -> str:
    lines = []
    for f in fields(spec):
        v = getattr(spec, f.name)
        if isinstance(v, enum.Enum):
            v = v.value
        if isinstance(v, str):
            lines.append(f'{f.name} = "{v}"')
        elif isinstance(v, tuple):
            lines.append(f"{f.name} = [{', '.join(str(x) for x in v)}]")
        else:
            lines.append(f"{f.name} = {v!r}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# per-trial data


@dataclass
class TrialRecord:
    m: int
    r: int
    trial: int
    stable: bool
    err: float = float("nan")
    x_norm: float = float("nan")
    x_l1: float = float("nan")
    objective: float = float("nan")
    feas_q: float = float("nan")
    feas_nu: float = float("nan")
    iters: int = 0
    converged: bool = False
    truth_feasible: bool = False
    plateau: bool = False

    @property
    def objective_ok(self):
        return self.objective <= self.x_l1 + 1e-6 * max(1.0, self.x_l1)


def _signal(spec: ExperimentSpec, t):
    if spec.scenario is Scenario.COMPRESSIBLE:
        return gen_compressible(spec.N, spec.p, spec.seed, key=(t,)).vector
    return gen_sparse(spec.N, spec.k, spec.radius, spec.seed, key=(t,)).vector


def quantizer_for(spec: ExperimentSpec, r: int, gamma=None) -> QuantizerSpec:
    if spec.one_bit:
        return QuantizerSpec.filtered(r, spec.mu, ONE_BIT, gamma=gamma)
    return QuantizerSpec.greedy(r, spec.delta, spec.mu)


@dataclass
class _Shared:
    spec: ExperimentSpec
    phi0: np.ndarray
    signals: list
    noise: list
    quantizers: dict
    cfg: SolverConfig


_WORKER = {}


def _init_worker(shared):
    _WORKER["shared"] = shared


def _run_item(item, shared=None):
    shared = shared or _WORKER["shared"]
    spec, cfg = shared.spec, shared.cfg
    m, r = item
    phi = shared.phi0[:m]
    ctx = DecodeContext(phi, r)
    qs = shared.quantizers[r]
    out = []
    for t, x in enumerate(shared.signals):
        eta = shared.noise[t][:m] if spec.eps > 0 else None
        y = phi @ x if eta is None else phi @ x + eta
        st = sigma_delta(qs, y)
        rec = TrialRecord(m, r, t, st.stable)
        if not st.stable:
            log.warning("unstable quantizer run excluded (m=%d, r=%d, trial=%d, max|u|=%.4g > %.4g)",
                        m, r, t, st.u_max, qs.gamma)
            out.append(rec)
            continue
        # the truth must satisfy the l2-ball constraints before decoding
        truth = DecodeProblem(phi, st.q, r, qs.gamma, spec.eps, ConstraintNorm.L2BALL)
        fq, fn = constraint_residuals(truth, x, eta)
        rec.truth_feasible = fq == 0.0 and fn == 0.0
        if not rec.truth_feasible:
            log.warning("true signal violates the decoder constraints (m=%d, r=%d, trial=%d)", m, r, t)
        p = DecodeProblem(phi, st.q, r, qs.gamma, spec.eps, spec.constraint_norm)
        res = decode_onestage(p, cfg, ctx)
        rec.err = float(np.linalg.norm(res.x_hat - x))
        rec.x_norm = float(np.linalg.norm(x))
        rec.x_l1 = float(np.abs(x).sum())
        rec.objective = res.objective
        rec.feas_q, rec.feas_nu = res.feas_q, res.feas_nu
        rec.iters, rec.converged = res.iters, res.converged
        rec.plateau = abs(rec.err - rec.x_norm) <= PLATEAU_REL * rec.x_norm
        out.append(rec)
    log.info("finished m=%d r=%d", m, r)
    return out


# ---------------------------------------------------------------------------
# aggregation


@dataclass
class ReportRow:
    r: str
    m: int
    worst_err: float
    mean_err: float
    n_unstable: int
    n_plateau: int
    plateau_point: bool
    n_unconverged: int = 0


@dataclass
class ErrorReport:
    spec: ExperimentSpec
    rows: list
    records: list = field(default_factory=list)

    def series(self, r):
        r = str(r)
        return [row for row in self.rows if row.r == r]

    @property
    def series_names(self):
        seen = []
        for row in self.rows:
            if row.r not in seen:
                seen.append(row.r)
        return seen

    def values(self, r, stat=None):
        stat = stat or self.spec.aggregate
        rows = self.series(r)
        m = np.array([row.m for row in rows], dtype=float)
        v = np.array([row.worst_err if stat == "worst" else row.mean_err for row in rows])
        return m, v

    def slope(self, r, stat=None):
        return fit_slope(self, window_start(self, r), r=r, stat=stat)


def _aggregate(m, r_label, errs, plateaus, n_unstable, n_unconv):
    if errs:
        worst_i = int(np.argmax(errs))
        return ReportRow(r_label, m, float(errs[worst_i]), float(np.mean(errs)), n_unstable,
                         int(sum(plateaus)), bool(plateaus[worst_i]), n_unconv)
    return ReportRow(r_label, m, float("nan"), float("nan"), n_unstable, 0, False, n_unconv)


def _build_rows(spec, records):
    by = {}
    for rec in records:
        by.setdefault((rec.r, rec.m), []).append(rec)
    rows = []
    for r in spec.r_list:
        for m in spec.m_grid:
            recs = by[(r, m)]
            ok = [x for x in recs if x.stable]
            rows.append(_aggregate(m, str(r), [x.err for x in ok], [x.plateau for x in ok],
                                   len(recs) - len(ok), sum(not x.converged for x in ok)))
    if spec.scenario is Scenario.ROOTEXP:
        for m in spec.m_grid:
            best = {}
            for r in spec.r_list:
                for x in by[(r, m)]:
                    if x.stable and (x.trial not in best or x.err < best[x.trial].err):
                        best[x.trial] = x
            trials = sorted(best)
            rows.append(_aggregate(m, OPT, [best[t].err for t in trials],
                                   [best[t].plateau for t in trials], spec.trials - len(trials),
                                   sum(not best[t].converged for t in trials)))
    return rows


def resolve_threads(threads=None):
    env = os.environ.get("SDCS_THREADS")
    if env:
        try:
            threads = int(env)
        except ValueError:
            raise ValueError(f"SDCS_THREADS must be an integer, got {env!r}") from None
    threads = 1 if threads is None else int(threads)
    if threads < 1:
        raise ValueError("thread count must be >= 1")
    return threads


def run_experiment(spec: ExperimentSpec, threads=None, cfg: SolverConfig = None) -> ErrorReport:
    """Run every (m, r, trial) of ``spec`` and aggregate per m."""
    threads = resolve_threads(threads)
    cfg = cfg or SolverConfig()
    mmax = max(spec.m_grid)
    phi0 = gen_matrix(spec.dist, mmax, spec.N, spec.seed).matrix
    signals = [_signal(spec, t) for t in range(spec.trials)]
    noise = [gen_noise(mmax, spec.eps, spec.seed, key=(t,)).vector for t in range(spec.trials)]
    quantizers = {r: quantizer_for(spec, r) for r in spec.r_list}
    shared = _Shared(spec, phi0, signals, noise, quantizers, cfg)
    items = [(m, r) for r in spec.r_list for m in spec.m_grid]
    # largest problems first so the pool stays busy
    order = sorted(range(len(items)), key=lambda i: -items[i][0])
    if threads == 1:
        results = {i: _run_item(items[i], shared) for i in order}
    else:
        with ProcessPoolExecutor(max_workers=threads, initializer=_init_worker,
                                 initargs=(shared,)) as pool:
            futs = {i: pool.submit(_run_item, items[i]) for i in order}
            results = {i: f.result() for i, f in futs.items()}
    records = [rec for i in range(len(items)) for rec in results[i]]
    return ErrorReport(spec, _build_rows(spec, records), records)


# ---------------------------------------------------------------------------
# slopes


def window_start(report: ErrorReport, r) -> float:
    """Smallest m used for slope fitting.

    Drops the two smallest grid values and every point up to the last one
    whose worst-case trial sits on the plateau (decoder returned ~0).
    """
    rows = report.series(r)
    start = 2
    for i, row in enumerate(rows):
        if row.plateau_point:
            start = max(start, i + 1)
    if start >= len(rows):
        return float("inf")
    return float(rows[start].m)


def fit_slope(report: ErrorReport, m_min: float, r=None, stat=None):
    """Least-squares line through (log10 m, log10 err) over m >= m_min."""
    if r is None:
        names = report.series_names
        if len(names) != 1:
            raise ValueError(f"report has series {names}; pass r")
        r = names[0]
    m, v = report.values(r, stat)
    keep = (m >= m_min) & np.isfinite(v) & (v > 0)
    if keep.sum() < 3:
        raise ValueError(f"need >= 3 points with m >= {m_min} to fit a slope, have {int(keep.sum())}")
    slope, intercept = np.polyfit(np.log10(m[keep]), np.log10(v[keep]), 1)
    return float(slope), float(intercept)


# ---------------------------------------------------------------------------
# output

REPORT_COLUMNS = ("r", "m", "worst_err", "mean_err", "n_unstable", "n_plateau", "plateau_point")


def _num(v):
    return repr(float(v))


def report_csv(report: ErrorReport) -> str:
    lines = [",".join(REPORT_COLUMNS)]
    for row in report.rows:
        lines.append(",".join([row.r, str(row.m), _num(row.worst_err), _num(row.mean_err),
                               str(row.n_unstable), str(row.n_plateau), str(int(row.plateau_point))]))
    return "\n".join(lines) + "\n"


def read_report_csv(path, spec: ExperimentSpec = None) -> ErrorReport:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        body = [line.strip().split(",") for line in fh if line.strip()]
    if tuple(h.strip() for h in header) != REPORT_COLUMNS:
        raise ValueError(f"unexpected report header {header}")
    rows = [ReportRow(c[0], int(c[1]), float(c[2]), float(c[3]), int(c[4]), int(c[5]), bool(int(c[6])))
            for c in body]
    if spec is None:
        spec = _placeholder_spec(rows)
    return ErrorReport(spec, rows)


def _placeholder_spec(rows):
    grid = sorted({row.m for row in rows})
    rs = tuple(int(row.r) for row in rows if row.r.isdigit())
    scenario = Scenario.ROOTEXP if any(row.r == OPT for row in rows) else Scenario.SPARSE
    return ExperimentSpec.default(scenario, m_grid=grid, r_list=tuple(dict.fromkeys(rs)) or (1,))


def plot_data(report: ErrorReport):
    """{filename: text} with ``log10(m) log10(err)`` per series (err per the scenario's statistic)."""
    out = {}
    for r in report.series_names:
        m, v = report.values(r)
        lines = [f"{_num(np.log10(mi))} {_num(np.log10(vi))}" for mi, vi in zip(m, v) if vi > 0]
        out[f"{report.spec.scenario.value}_r{r}.dat"] = "\n".join(lines) + "\n"
    return out


def decode_records(report: ErrorReport):
    s = report.spec
    for rec in report.records:
        yield {"m": rec.m, "N": s.N, "k": s.k, "r": rec.r, "rule": s.rule, "delta": s.delta,
               "eps": s.eps, "objective": rec.objective, "feas_q": rec.feas_q,
               "feas_nu": rec.feas_nu, "iters": rec.iters, "converged": rec.converged,
               "err_l2": rec.err}


def write_outputs(report: ErrorReport, outdir, fmt="csv"):
    """Write report.csv (or records.jsonl) and the plot-data files; returns the paths."""
    from .io import write_jsonl

    os.makedirs(outdir, exist_ok=True)
    paths = []
    name = report.spec.scenario.value
    if fmt == "csv":
        path = os.path.join(outdir, f"{name}_report.csv")
        with open(path, "w") as fh:
            fh.write(report_csv(report))
    elif fmt == "jsonl":
        path = os.path.join(outdir, f"{name}_records.jsonl")
        write_jsonl(decode_records(report), path)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    paths.append(path)
    for fname, text in plot_data(report).items():
        p = os.path.join(outdir, fname)
        with open(p, "w") as fh:
            fh.write(text)
        paths.append(p)
    return paths


__all__ = [
    "Scenario", "ExperimentSpec", "TrialRecord", "ReportRow", "ErrorReport", "log_grid",
    "load_spec", "spec_from_mapping", "spec_to_toml", "run_experiment", "fit_slope",
    "window_start", "report_csv", "read_report_csv", "plot_data", "write_outputs",
    "quantizer_for", "resolve_threads",
]
