"""Experiment runner: config -> objective + optimizer -> measurement trace.

Config files are flat ``key = value`` text, one key per line, ``#`` starts
a comment. Keys:

  algorithm      zerosarah | sarah | gd | d-zerosarah | d-sarah
  dataset        a registry name loaded from $VROPT_DATA_DIR   \\
  dataset_file   path to a LIBSVM file                          | exactly
  synthetic_n    synthetic data (with synthetic_d, synthetic_kind,  | one
                 synthetic_noise, synthetic_seed)               |
  quadratic_n    quadratic test problem (with quadratic_d,      /
                 quadratic_seed, quadratic_kind = random | isotropic)
  objective      robust | sigmoid   (ignored for quadratic sources)
  lambda         sigmoid regularizer, a number or "auto"
  L              smoothness constant override
  preset         cor1 | cor2 | cor3 | custom  (cor1d | cor2d | cor3d | custom)
  stepsize       explicit stepsize; a comma list runs a sweep
  scale          multiplier on the theoretical stepsize
  epsilon, g0    cor3/cor3d inputs; g0 = auto measures it at x0
  batch, b0, lam custom schedule values
  epoch_length   SARAH / distributed SARAH epoch length
  n_clients, client_sample, s0   federation settings
  max_iters, max_grads            budget (at least one)
  cadence        iterations between measurements
  seed, x0 (zeros | normal), x0_scale
  bounds         true to report the theoretical bound
  output_csv, output_svg
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from . import data as data_mod
from .bounds import theoretical_bound, theoretical_bound_dist
from .distributed import DSARAH, FULL, DZeroSARAH
from .errors import ConfigError, DivergenceError, InvalidArgument, NumericalOverflow
from .model import (
    BINARY, Objective, QuadraticTest, RobustLinearRegression, SigmoidSquared, default_regularizer,
)
from .optimizers import GD, SARAH, ZeroSARAH, select_output
from .sampling import SERVER, stream
from .schedule import (
    ceil_sqrt, dist_schedule_preset, dsarah_schedule, sarah_schedule, schedule_preset, theoretical_stepsize,
)

SEQUENTIAL = ("zerosarah", "sarah", "gd")
DISTRIBUTED = ("d-zerosarah", "d-sarah")

CSV_FIELDS = ["iter", "paper_count", "actual_count", "grad_norm", "objective", "full_batch_event"]

_INT_KEYS = {
    "synthetic_n", "synthetic_d", "synthetic_seed", "quadratic_n", "quadratic_d", "quadratic_seed",
    "batch", "b0", "epoch_length", "n_clients", "client_sample", "s0", "max_iters", "max_grads",
    "cadence", "seed",
}
_FLOAT_KEYS = {"synthetic_noise", "L", "scale", "epsilon", "lam", "x0_scale"}
_STR_KEYS = {
    "algorithm", "dataset", "dataset_file", "synthetic_kind", "quadratic_kind", "objective", "lambda",
    "preset", "stepsize", "g0", "x0", "bounds", "output_csv", "output_svg",
}


@dataclass
class ExperimentConfig:
    algorithm: str
    dataset: str | None = None
    dataset_file: str | None = None
    synthetic_n: int | None = None
    synthetic_d: int = 10
    synthetic_kind: str = "regression"
    synthetic_noise: float = 0.0
    synthetic_seed: int = 0
    quadratic_n: int | None = None
    quadratic_d: int = 5
    quadratic_seed: int = 0
    quadratic_kind: str = "random"
    objective: str = "robust"
    lam_reg: str = "0"
    L: float | None = None
    preset: str | None = None
    stepsize: float | None = None
    scale: float = 1.0
    epsilon: float | None = None
    g0: str | None = None
    batch: int | None = None
    b0: int | None = None
    lam: float | None = None
    epoch_length: int | None = None
    n_clients: int | None = None
    client_sample: int | None = None
    s0: int | None = None
    max_iters: int | None = None
    max_grads: int | None = None
    cadence: int | None = None
    seed: int = 0
    x0: str = "zeros"
    x0_scale: float = 1.0
    bounds: bool = False
    output_csv: str | None = None
    output_svg: str | None = None
    stepsizes: list[float] = field(default_factory=list)

    def __post_init__(self):
        if self.algorithm not in SEQUENTIAL + DISTRIBUTED:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        sources = [self.dataset, self.dataset_file, self.synthetic_n, self.quadratic_n]
        if sum(s is not None for s in sources) != 1:
            raise ConfigError("specify exactly one of dataset, dataset_file, synthetic_n, quadratic_n")
        if self.max_iters is None and self.max_grads is None:
            raise ConfigError("need a budget: max_iters and/or max_grads")
        for key in ("max_iters", "max_grads"):
            v = getattr(self, key)
            if v is not None and v <= 0:
                raise ConfigError(f"{key} must be > 0")
        if self.cadence is not None and self.cadence < 1:
            raise ConfigError("cadence must be >= 1")
        if self.algorithm in DISTRIBUTED and self.n_clients is None:
            raise ConfigError("distributed algorithms need n_clients")
        if self.x0 not in ("zeros", "normal"):
            raise ConfigError("x0 must be zeros or normal")

    @property
    def distributed(self) -> bool:
        return self.algorithm in DISTRIBUTED


def parse_config(text: str) -> ExperimentConfig:
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected key = value")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            if key in _INT_KEYS:
                values[key] = int(val)
            elif key in _FLOAT_KEYS:
                values[key] = float(val)
            elif key in _STR_KEYS:
                values[key] = val
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value {val!r} for {key}") from None
    if "algorithm" not in values:
        raise ConfigError("missing algorithm")
    if "lambda" in values:
        values["lam_reg"] = values.pop("lambda")
    if "bounds" in values:
        values["bounds"] = values["bounds"].lower() in ("1", "true", "yes", "on")
    if "stepsize" in values:
        try:
            steps = [float(s) for s in values.pop("stepsize").split(",")]
        except ValueError:
            raise ConfigError("stepsize must be a number or comma-separated numbers") from None
        values["stepsize"] = steps[0]
        values["stepsizes"] = steps
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    return parse_config(path.read_text())


@dataclass
class TraceRecord:
    iter: int
    paper_count: int
    actual_count: int
    grad_norm: float
    objective: float
    full_batch_event: bool
    sampled_clients: tuple[int, ...] | None = None


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    trace: list[TraceRecord]
    error: str | None = None
    bound: dict | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def diverged(self) -> bool:
        return self.error is not None


def build_objective(cfg: ExperimentConfig) -> Objective:
    if cfg.quadratic_n is not None:
        if cfg.quadratic_kind == "isotropic":
            return QuadraticTest.isotropic(cfg.quadratic_n, cfg.quadratic_d)
        if cfg.quadratic_kind == "random":
            return QuadraticTest.random(cfg.quadratic_n, cfg.quadratic_d, seed=cfg.quadratic_seed)
        raise ConfigError(f"unknown quadratic_kind {cfg.quadratic_kind!r}")
    if cfg.dataset is not None:
        ds = data_mod.load_named(cfg.dataset)
    elif cfg.dataset_file is not None:
        ds = data_mod.read_libsvm(cfg.dataset_file, kind=BINARY if cfg.objective == "sigmoid" else None)
    else:
        kind = "classification" if cfg.objective == "sigmoid" else cfg.synthetic_kind
        ds = data_mod.synthesize_dataset(data_mod.SyntheticSpec(
            cfg.synthetic_n, cfg.synthetic_d, kind, cfg.synthetic_noise, cfg.synthetic_seed))
    if cfg.objective == "robust":
        return RobustLinearRegression(ds)
    if cfg.objective == "sigmoid":
        lam = default_regularizer(ds) if cfg.lam_reg == "auto" else float(cfg.lam_reg)
        return SigmoidSquared(ds, lam)
    raise ConfigError(f"unknown objective {cfg.objective!r}")


def _initial_point(cfg: ExperimentConfig, d: int) -> np.ndarray:
    if cfg.x0 == "zeros":
        return np.zeros(d)
    return cfg.x0_scale * stream(cfg.seed, SERVER, 0).standard_normal(d)


def _mean_sq_component_grad(objs: list[Objective], x) -> float:
    # G0 = mean over every component of ||grad f_i(x0)||^2; measurement only
    total, count = 0.0, 0
    for obj in objs:
        g = obj.gradients(obj.all_indices(), x)
        total += float(np.sum(g * g))
        count += obj.n
    return total / count


def _stepsize(cfg: ExperimentConfig, L: float) -> float:
    return cfg.stepsize if cfg.stepsize is not None else cfg.scale * theoretical_stepsize(L)


def _preset_extras(cfg: ExperimentConfig, objs, x0) -> dict:
    extras = {"stepsize": cfg.stepsize, "scale": cfg.scale, "epsilon": cfg.epsilon}
    if cfg.g0 is not None:
        extras["G0"] = _mean_sq_component_grad(objs, x0) if cfg.g0 == "auto" else float(cfg.g0)
    for key, name in (("batch", "batch"), ("b0", "b0"), ("lam", "lam"), ("client_sample", "clients"), ("s0", "s0")):
        if getattr(cfg, key) is not None:
            extras[name] = getattr(cfg, key)
    return extras


def build_optimizer(cfg: ExperimentConfig, obj: Objective, x0):
    L = cfg.L if cfg.L is not None else obj.smoothness()
    if cfg.algorithm == "zerosarah":
        sched = schedule_preset(cfg.preset or "cor2", obj.n, L, **_preset_extras(cfg, [obj], x0))
        return ZeroSARAH(obj, sched, x0, cfg.seed)
    if cfg.algorithm == "sarah":
        return SARAH(obj, sarah_schedule(obj.n, _stepsize(cfg, L), cfg.epoch_length, cfg.batch), x0, cfg.seed)
    if cfg.algorithm == "gd":
        eta = cfg.stepsize if cfg.stepsize is not None else cfg.scale / L
        return GD(obj, eta, x0, cfg.seed)
    clients = data_mod.partition_objective(obj, cfg.n_clients)
    n, m = len(clients), clients[0].n
    if cfg.algorithm == "d-zerosarah":
        sched = dist_schedule_preset(cfg.preset or "cor2d", n, m, L, **_preset_extras(cfg, clients, x0))
        return DZeroSARAH(clients, sched, x0, cfg.seed)
    sched = dsarah_schedule(n, m, _stepsize(cfg, L), cfg.epoch_length, cfg.client_sample, cfg.batch)
    return DSARAH(clients, sched, x0, cfg.seed)


def _components(opt) -> list[Objective]:
    if isinstance(opt, (DZeroSARAH, DSARAH)):
        return [c.obj for c in opt.clients]
    return [opt.obj]


def _measure(opt) -> tuple[float, float]:
    if isinstance(opt, (DZeroSARAH, DSARAH)):
        g, f = opt.full_gradient(), opt.value()
    else:
        g, f = opt.obj.full_gradient(opt.x), opt.obj.value(opt.x)
    if not (np.all(np.isfinite(g)) and np.isfinite(f)):
        raise NumericalOverflow("non-finite measurement")
    return float(np.linalg.norm(g)), float(f)


def _counters(opt):
    return opt.counters if isinstance(opt, (DZeroSARAH, DSARAH)) else opt.state.counters


def _iteration(opt) -> int:
    return opt.round if isinstance(opt, (DZeroSARAH, DSARAH)) else opt.state.k


def run_experiment(cfg: ExperimentConfig, obj: Objective | None = None) -> ExperimentResult:
    """Run one configuration to its budget (or divergence) and return its trace.

    Full-gradient measurements happen every ``cadence`` iterations, outside
    the optimizer, so they never show up in its gradient counters.
    """
    obj = build_objective(cfg) if obj is None else obj
    x0 = _initial_point(cfg, obj.d)
    opt = build_optimizer(cfg, obj, x0)
    cadence = cfg.cadence or (1 if cfg.distributed else ceil_sqrt(obj.n))
    max_iters = cfg.max_iters if cfg.max_iters is not None else math.inf
    max_grads = cfg.max_grads if cfg.max_grads is not None else math.inf
    result = ExperimentResult(cfg, [])
    sched = getattr(opt, "schedule", None)
    result.notes.extend(getattr(sched, "notes", []))
    keep_history = cfg.bounds
    iterates, etas = [], []

    def record(full: bool, sampled):
        c = _counters(opt)
        gnorm, fval = _measure(opt)
        result.trace.append(TraceRecord(_iteration(opt), c.paper_count, c.actual_count, gnorm, fval,
                                        full, sampled if cfg.distributed else None))

    try:
        record(False, ())
        full_since, sampled = False, ()
        while _iteration(opt) < max_iters and _counters(opt).paper_count < max_grads:
            if keep_history:
                iterates.append(opt.x.copy())
            rep = opt.step()
            if keep_history:
                etas.append(rep.eta)
            if cfg.distributed:
                full_since |= rep.participation == FULL
                sampled = rep.sampled
            else:
                full_since |= rep.full_batch
            if _iteration(opt) % cadence == 0:
                record(full_since, sampled)
                full_since = False
        if result.trace[-1].iter != _iteration(opt):
            record(full_since, sampled)
    except (DivergenceError, NumericalOverflow) as exc:
        result.error = str(exc)
        return result

    if cfg.bounds:
        result.bound = _bound_report(cfg, opt, obj, x0, iterates, etas, result.trace)
    return result


def _bound_report(cfg, opt, obj, x0, iterates, etas, trace) -> dict:
    sched = getattr(opt, "schedule", None)
    K = len(iterates)
    if cfg.algorithm not in ("zerosarah", "d-zerosarah") or not getattr(sched, "theoretical", False) or K == 0:
        return {"available": False, "reason": "bounds need zerosarah/d-zerosarah on a theoretical preset"}
    f0 = obj.value(x0)
    if isinstance(obj, QuadraticTest):
        delta0, proxy = f0 - obj.optimal_value(), False
    else:
        delta0, proxy = f0 - min(r.objective for r in trace), True
    G0 = _mean_sq_component_grad(_components(opt), x0)
    if cfg.distributed:
        bound = theoretical_bound_dist(delta0, G0, sched, K)
    else:
        bound = theoretical_bound(delta0, G0, sched, K)
    x_hat = select_output(iterates, etas, stream(cfg.seed, SERVER, 1))
    g = opt.full_gradient(x_hat) if cfg.distributed else obj.full_gradient(x_hat)
    return {
        "available": True, "K": K, "delta0": delta0, "delta0_is_proxy": proxy, "G0": G0,
        "bound": bound, "output_sq_grad_norm": float(g @ g),
    }


def run_sweep(cfg: ExperimentConfig) -> list[ExperimentResult]:
    steps = cfg.stepsizes or [cfg.stepsize]
    obj = build_objective(cfg)
    return [run_experiment(replace(cfg, stepsize=s, stepsizes=[]), obj) for s in steps]


def _fmt(v: float) -> str:
    return repr(float(v))


def trace_to_csv(trace: list[TraceRecord], distributed: bool | None = None) -> str:
    if not trace:
        raise InvalidArgument("empty trace")
    if distributed is None:
        distributed = trace[0].sampled_clients is not None
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS + (["sampled_clients"] if distributed else []))
    for r in trace:
        row = [r.iter, r.paper_count, r.actual_count, _fmt(r.grad_norm), _fmt(r.objective), int(r.full_batch_event)]
        if distributed:
            row.append(";".join(str(i) for i in (r.sampled_clients or ())))
        w.writerow(row)
    return buf.getvalue()


def write_trace_csv(trace: list[TraceRecord], path) -> None:
    text = trace_to_csv(trace)
    Path(path).write_text(text)


def read_trace_csv(path_or_text) -> list[TraceRecord]:
    text = path_or_text
    if isinstance(path_or_text, Path) or (isinstance(path_or_text, str) and "\n" not in path_or_text):
        text = Path(path_or_text).read_text()
    rows = list(csv.DictReader(io.StringIO(text)))
    out = []
    for row in rows:
        sampled = None
        if "sampled_clients" in row:
            s = row["sampled_clients"]
            sampled = tuple(int(i) for i in s.split(";")) if s else ()
        out.append(TraceRecord(
            int(row["iter"]), int(row["paper_count"]), int(row["actual_count"]),
            float(row["grad_norm"]), float(row["objective"]), row["full_batch_event"] == "1", sampled,
        ))
    return out


# ---- SVG -------------------------------------------------------------------

WIDTH, HEIGHT = 960, 600
_LEFT, _RIGHT, _TOP, _BOTTOM = 90, 200, 40, 70
_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"]


def emit_plot_svg(traces, path, title: str | None = None) -> str:
    """Gradient norm (log scale) against the nominal (sum of b_k) gradient count.

    ``traces`` is a list of (label, records). Records flagged as full-batch
    events get a circle marker. Returns the SVG text as well as writing it.
    """
    traces = list(traces)
    if not traces or any(len(recs) == 0 for _, recs in traces):
        raise InvalidArgument("need at least one nonempty trace")
    xs = [r.paper_count for _, recs in traces for r in recs]
    positive = [r.grad_norm for _, recs in traces for r in recs if r.grad_norm > 0]
    floor = min(positive) / 10 if positive else 1e-16
    ys = [math.log10(max(r.grad_norm, floor)) for _, recs in traces for r in recs]
    x_max = max(xs) or 1
    y_lo, y_hi = math.floor(min(ys)), math.ceil(max(ys))
    if y_hi == y_lo:
        y_hi += 1
    pw, ph = WIDTH - _LEFT - _RIGHT, HEIGHT - _TOP - _BOTTOM

    def px(v):
        return _LEFT + pw * v / x_max

    def py(g):
        return _TOP + ph * (y_hi - math.log10(max(g, floor))) / (y_hi - y_lo)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{_LEFT}" y="{_TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" font-size="16">{escape(title)}</text>')
    for e in range(y_lo, y_hi + 1):
        y = py(10.0**e)
        out.append(f'<line x1="{_LEFT - 5}" y1="{y:.2f}" x2="{_LEFT}" y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{_LEFT - 8}" y="{y + 4:.2f}" text-anchor="end" font-size="12">1e{e}</text>')
    for t in range(6):
        v = x_max * t / 5
        x = px(v)
        out.append(f'<line x1="{x:.2f}" y1="{_TOP + ph}" x2="{x:.2f}" y2="{_TOP + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{_TOP + ph + 20}" text-anchor="middle" font-size="12">{v:.4g}</text>')
    out.append(f'<text x="{_LEFT + pw / 2:.1f}" y="{HEIGHT - 20}" text-anchor="middle" font-size="14">'
               'number of stochastic gradient computations</text>')
    out.append(f'<text x="20" y="{_TOP + ph / 2:.1f}" text-anchor="middle" font-size="14" '
               f'transform="rotate(-90 20 {_TOP + ph / 2:.1f})">norm of gradient</text>')
    for n_trace, (label, recs) in enumerate(traces):
        color = _COLORS[n_trace % len(_COLORS)]
        pts = " ".join(f"{px(r.paper_count):.2f},{py(r.grad_norm):.2f}" for r in recs)
        out.append(f'<polyline class="trace" fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        for r in recs:
            if r.full_batch_event:
                out.append(f'<circle cx="{px(r.paper_count):.2f}" cy="{py(r.grad_norm):.2f}" r="4" '
                           f'fill="none" stroke="{color}"/>')
        ly = _TOP + 20 + 22 * n_trace
        lx = WIDTH - _RIGHT + 15
        out.append(f'<line class="legend" x1="{lx}" y1="{ly}" x2="{lx + 25}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text class="legend" x="{lx + 32}" y="{ly + 4}" font-size="12">{escape(str(label))}</text>')
    out.append("</svg>")
    svg = "\n".join(out) + "\n"
    Path(path).write_text(svg)
    return svg
