"""Repeated-split experiments: one factor varied, everything else fixed.

An experiment is described by a JSON document (see README) and produces
one record per (method, factor value, hyperparameter point) with the mean
and standard error of the error rate over seeded trials.
"""
import copy
import csv
import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .data import SplitSpec, generate_3circles, generate_blobs, preset, sample_split
from .graph import KernelSpec, build_laplacian, build_similarity, median_distance, read_csv
from .predict import error_rate, predict_multiclass, serendipitous_errors
from .solver import EigenCache, SolverConfig, SolverError, lgc, solve

__all__ = [
    "METHODS",
    "RESULT_COLUMNS",
    "ExperimentSpec",
    "ResultRecord",
    "ExperimentResult",
    "run_experiment",
    "write_results",
    "mean_and_stderr",
]

log = logging.getLogger(__name__)

METHODS = ("mavr_constrained", "mavr_unconstrained", "lgc")
RESULT_COLUMNS = (
    "method",
    "factor_name",
    "factor_value",
    "gamma",
    "tau",
    "balance_gamma",
    "mean_error",
    "std_error",
    "trials",
    "failures",
)
FACTORS = ("sigma_eps", "n", "sigma", "sigma_scale", "k", "l", "gamma", "tau", "tau_scale", "balance_gamma")
MAX_FAILURE_RATE = 0.1

# default value grids for the factor sweeps
SIGMA_SCALES = (1 / 16, 1 / 8, 1 / 4, 1 / 2, 1)
K_GRID = (1, 3, 5, 7, 9)
TAU_SCALES = (1 / 16, 1 / 8, 1 / 4, 1 / 2, 1)


def _as_list(v):
    if v is None:
        return None
    return list(v) if isinstance(v, (list, tuple)) else [v]


@dataclass
class ExperimentSpec:
    """Parsed experiment description.

    ``tau`` lists absolute values; when it is empty the grid is
    ``tau_scale * sqrt(l)`` (default scale 1). ``kernel`` may give
    ``sigma_scale`` instead of ``sigma`` to use multiples of the median
    pairwise distance. ``P`` is ``"identity"``, a preset name or a matrix.
    """

    dataset: dict
    kernel: dict = field(default_factory=lambda: {"kind": "gaussian", "sigma": 0.5})
    laplacian: str = "normalized"
    methods: List[str] = field(default_factory=lambda: ["mavr_constrained", "lgc"])
    P: object = "identity"
    gamma: List[float] = field(default_factory=lambda: [99.0])
    tau: Optional[List[float]] = None
    tau_scale: List[float] = field(default_factory=lambda: [1.0])
    balance_gamma: List[float] = field(default_factory=lambda: [0.0])
    split: dict = field(default_factory=lambda: {"l": 3, "policy": "stratified"})
    factor: Optional[dict] = None
    trials: int = 100
    base_seed: int = 0
    tune: Optional[dict] = None
    eigensolver: str = "jacobi"

    def __post_init__(self):
        self.gamma = [float(g) for g in _as_list(self.gamma)]
        self.tau = None if self.tau is None else [float(t) for t in _as_list(self.tau)]
        self.tau_scale = [float(t) for t in _as_list(self.tau_scale)]
        self.balance_gamma = [float(b) for b in _as_list(self.balance_gamma)]
        self.methods = list(_as_list(self.methods))
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}; choose from {METHODS}")
        if int(self.trials) < 1:
            raise ValueError("trials must be at least 1")
        self.trials = int(self.trials)
        if not self.methods or not self.gamma or not self.tau_scale or not self.balance_gamma:
            raise ValueError("methods and hyperparameter grids must be nonempty")
        if self.tau is not None and not self.tau:
            raise ValueError("tau grid must be nonempty")
        if self.factor is not None:
            if self.factor.get("name") not in FACTORS:
                raise ValueError(f"unknown factor {self.factor.get('name')!r}; choose from {FACTORS}")
            if not _as_list(self.factor.get("values")):
                raise ValueError("factor values must be nonempty")

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown experiment keys: {sorted(unknown)}")
        return cls(**copy.deepcopy(d))

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def with_factor(self, name, value):
        """Copy of this spec with one factor set to ``value``."""
        s = copy.deepcopy(self)
        s.factor = None
        if name in ("sigma_eps", "n"):
            s.dataset[name] = value
        elif name == "sigma":
            s.kernel["sigma"] = value
            s.kernel.pop("sigma_scale", None)
        elif name in ("sigma_scale", "k"):
            s.kernel[name] = value
        elif name == "l":
            s.split["l"] = int(value)
        elif name in ("gamma", "tau_scale", "balance_gamma"):
            setattr(s, name, [float(value)])
        elif name == "tau":
            s.tau = [float(value)]
        return s


@dataclass
class ResultRecord:
    method: str
    factor_name: str
    factor_value: float
    gamma: float
    tau: float
    balance_gamma: float
    mean_error: float
    std_error: float
    trials: int
    failures: int
    mean_iterations: float = 0.0
    max_g_residual: float = 0.0

    def row(self):
        return {k: getattr(self, k) for k in RESULT_COLUMNS}


@dataclass
class ExperimentResult:
    records: List[ResultRecord] = field(default_factory=list)


def mean_and_stderr(values):
    """Two-pass mean and standard error ``std(ddof=1) / sqrt(m)``; 0 for one value."""
    m = len(values)
    mean = sum(values) / m
    if m < 2:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (m - 1)
    return mean, math.sqrt(var) / math.sqrt(m)


def load_dataset(desc, base_seed=0):
    """Build a :class:`~mavr.graph.Dataset` from a dataset description."""
    if "csv" in desc:
        return read_csv(desc["csv"], labels=True)
    gen = desc.get("generator")
    seed = desc.get("seed", base_seed)
    if gen == "3circles":
        return generate_3circles(int(desc.get("n", 300)), float(desc.get("sigma_eps", 0.5)), seed)
    if gen == "blobs":
        return generate_blobs(desc["centers"], desc["counts"], float(desc.get("sigma", 1.0)), seed)
    raise ValueError(f"dataset needs 'csv' or a generator in (3circles, blobs), got {desc!r}")


def _kernel(desc, data):
    desc = dict(desc)
    if "sigma_scale" in desc:
        desc["sigma"] = float(desc.pop("sigma_scale")) * median_distance(data)
    return KernelSpec(desc.get("kind", "gaussian"), desc.get("sigma"), desc.get("k"))


def _class_matrix(P, c):
    if P is None or (isinstance(P, str) and P.lower() == "identity"):
        return None
    M = preset(P) if isinstance(P, str) else np.asarray(P, dtype=float)
    if M.shape != (c, c):
        raise ValueError(f"P is {M.shape}, but the data has {c} classes")
    return M


def _grid(spec, method, l):
    """Hyperparameter points ``(gamma, tau, balance_gamma)``; NaN marks unused ones."""
    nan = float("nan")
    if method == "lgc":
        return [(g, nan, nan) for g in spec.gamma]
    if method == "mavr_unconstrained":
        return [(g, nan, b) for g in spec.gamma for b in spec.balance_gamma]
    taus = spec.tau if spec.tau is not None else [s * math.sqrt(l) for s in spec.tau_scale]
    return list(itertools.product(spec.gamma, taus, spec.balance_gamma))


def _run_trials(spec, data, Q, P, seeds, points, cache):
    """Error lists per (method, point) over the given trial seeds."""
    split = dict(spec.split)
    l = int(split["l"])
    c = data.n_classes
    out = {(m, p): ([], [], []) for m, pts in points.items() for p in pts}
    for seed in seeds:
        sspec = SplitSpec(
            l,
            split.get("policy", "uniform"),
            frozenset(split.get("hidden_classes", ())),
            seed,
            bool(split.get("negatives", False)),
        )
        idx, Y = sample_split(data, sspec, n_classes=c)
        mask = np.ones(data.n, dtype=bool)
        mask[idx] = False
        for method, pts in points.items():
            for point in pts:
                errs, iters, gres = out[(method, point)]
                gamma, tau, bal = point
                try:
                    if method == "lgc":
                        H, it, gr = lgc(Q, Y, gamma), 0, 0.0
                    else:
                        mode = "constrained" if method == "mavr_constrained" else "unconstrained"
                        cfg = SolverConfig(gamma, tau if mode == "constrained" else 1.0, mode, bal)
                        sol = solve(P, Q, Y, cfg, cache=cache)
                        H, it, gr = sol.H, sol.iterations, abs(sol.g_residual)
                except (SolverError, ValueError, np.linalg.LinAlgError) as exc:
                    log.warning("trial seed=%d %s %s failed: %s", seed, method, point, exc)
                    errs.append(None)
                    continue
                pred = predict_multiclass(H)
                if sspec.policy == "serendipitous":
                    e = serendipitous_errors(pred, data.labels, mask, sspec.hidden_classes)["overall"]
                else:
                    e = error_rate(pred, data.labels, mask)
                errs.append(e)
                iters.append(it)
                gres.append(gr)
    return out


def _summarize(method, fname, fvalue, point, errs, iters, gres):
    ok = [e for e in errs if e is not None]
    failures = len(errs) - len(ok)
    if failures > MAX_FAILURE_RATE * len(errs):
        raise RuntimeError(
            f"{method} at {point} failed in {failures} of {len(errs)} trials; aborting"
        )
    mean, se = mean_and_stderr(ok)
    gamma, tau, bal = point
    return ResultRecord(
        method, fname, fvalue, gamma, tau, bal, mean, se, len(ok), failures,
        float(np.mean(iters)) if iters else 0.0,
        float(max(gres)) if gres else 0.0,
    )


def run_experiment(spec, cache=None):
    """Run every trial of ``spec`` and aggregate the error statistics.

    Trial ``t`` uses split seed ``base_seed + t``. The dataset and graph are
    built once per factor value, and eigensystems are shared through the
    cache across trials and hyperparameters. With a ``tune`` block
    ``{"trials": m, "seed_offset": s}`` each method's hyperparameters are
    first chosen on ``m`` extra splits (seeds ``base_seed + s + t``) using the
    true labels of the unlabeled points, then only that point is evaluated.
    """
    if isinstance(spec, dict):
        spec = ExperimentSpec.from_dict(spec)
    cache = cache if cache is not None else EigenCache(spec.eigensolver)

    if spec.factor is None:
        settings = [("none", float("nan"), spec)]
    else:
        name = spec.factor["name"]
        settings = [(name, float(v), spec.with_factor(name, v)) for v in spec.factor["values"]]

    result = ExperimentResult()
    for fname, fvalue, s in settings:
        data = load_dataset(s.dataset, s.base_seed)
        if data.labels is None or data.n_classes < 1:
            raise ValueError("experiments need a labeled dataset")
        W = build_similarity(data, _kernel(s.kernel, data))
        Q = build_laplacian(W, s.laplacian)
        P = _class_matrix(s.P, data.n_classes)
        l = int(s.split["l"])
        points = {m: _grid(s, m, l) for m in s.methods}

        if s.tune:
            offset = int(s.tune.get("seed_offset", 1_000_000))
            seeds = [s.base_seed + offset + t for t in range(int(s.tune.get("trials", 10)))]
            tuned = _run_trials(s, data, Q, P, seeds, points, cache)
            for m in s.methods:
                scores = []
                for p in points[m]:
                    ok = [e for e in tuned[(m, p)][0] if e is not None]
                    scores.append(sum(ok) / len(ok) if ok else math.inf)
                points[m] = [points[m][int(np.argmin(scores))]]
                log.info("tuned %s -> %s", m, points[m][0])

        seeds = [s.base_seed + t for t in range(s.trials)]
        runs = _run_trials(s, data, Q, P, seeds, points, cache)
        for m in s.methods:
            for p in points[m]:
                result.records.append(_summarize(m, fname, fvalue, p, *runs[(m, p)]))
    return result


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    return "" if math.isnan(v) else format(v, ".17g")


def _json_value(v):
    if isinstance(v, str):
        return json.dumps(v)
    s = _fmt(v)
    return "null" if s == "" else s


def write_results(result, path, format="csv"):
    """Write records as CSV (header always present) or a JSON list.

    Floats carry 17 significant digits; NaN becomes an empty field / null.
    """
    records = result.records if isinstance(result, ExperimentResult) else list(result)
    if format == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RESULT_COLUMNS)
            for r in records:
                w.writerow([_fmt(getattr(r, k)) for k in RESULT_COLUMNS])
    elif format == "json":
        lines = []
        for r in records:
            body = ", ".join(f"{json.dumps(k)}: {_json_value(getattr(r, k))}" for k in RESULT_COLUMNS)
            lines.append("  {" + body + "}")
        text = "[\n" + ",\n".join(lines) + "\n]\n" if lines else "[]\n"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    else:
        raise ValueError(f"unknown format {format!r}; use 'csv' or 'json'")
