"""Experiment layer: error metric, rank/kernel sweeps, CSV and SVG output,
and explicit-coordinate oracle checks on stored datasets.
"""

import csv
import io
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baselines, core, kernels, oracle, synthgen
from .exceptions import InvalidInputError, OKDMDError
from .preimage import SolverOptions

CSV_HEADER = (
    "method",
    "kernel",
    "k",
    "eps_train",
    "eps_test",
    "fit_seconds",
    "preimage_convergence_rate",
    "status",
)
METHODS = ("okdmd", "kdmd", "lowrank")

__all__ = [
    "CSV_HEADER",
    "METHODS",
    "epsilon",
    "ExperimentConfig",
    "ExperimentRow",
    "ExperimentTable",
    "sweep",
    "oracle_check",
    "render_svg",
]


def epsilon(predictions, truth):
    """Normalized error ``||P - T||_F / ||T||_F`` over all columns.

    Raises:
        InvalidInputError: on shape mismatch or an all-zero ``truth``.
    """
    P = np.asarray(predictions, dtype=float)
    T = np.asarray(truth, dtype=float)
    if P.shape != T.shape:
        raise InvalidInputError(f"prediction shape {P.shape} does not match truth {T.shape}")
    denom = np.linalg.norm(T)
    if denom == 0:
        raise InvalidInputError("truth is identically zero; normalized error undefined")
    return float(np.linalg.norm(P - T) / denom)


@dataclass
class ExperimentConfig:
    """Sweep definition.

    ``data`` is a dataset directory or a ``(GridSpec, GenConfig)`` pair
    generated on the fly. ``timing`` records wall-clock fit times; it is off
    by default so that tables are byte-reproducible.
    """

    data: object
    methods: tuple = ("okdmd", "kdmd")
    kernels: tuple = ("log",)
    ranks: tuple = (2,)
    inverse_mode: str = "closed_form"
    rank_tol: float = core.DEFAULT_RANK_TOL
    out: str = None
    workers: int = 1
    timing: bool = False
    solver_options: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        self.methods = tuple(self.methods)
        self.kernels = tuple(kernels.parse_kernel(k).designation for k in self.kernels)
        self.ranks = tuple(int(k) for k in self.ranks)
        if not (self.methods and self.kernels and self.ranks):
            raise InvalidInputError("methods, kernels and ranks must be non-empty")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise InvalidInputError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        if any(k < 1 for k in self.ranks):
            raise InvalidInputError("ranks must be positive")
        if self.inverse_mode == "closed":
            self.inverse_mode = "closed_form"
        if self.inverse_mode not in ("closed_form", "variational"):
            raise InvalidInputError(f"unknown inverse mode {self.inverse_mode!r}")
        if self.workers < 1:
            raise InvalidInputError("workers must be >= 1")


@dataclass(frozen=True)
class ExperimentRow:
    method: str
    kernel: str
    k: int
    eps_train: float
    eps_test: float
    fit_seconds: float = math.nan
    preimage_convergence_rate: float = math.nan
    status: str = "ok"

    def cells(self):
        return [
            self.method,
            self.kernel,
            str(self.k),
            _fmt(self.eps_train),
            _fmt(self.eps_test),
            _fmt(self.fit_seconds),
            _fmt(self.preimage_convergence_rate),
            self.status,
        ]


def _fmt(x):
    return "nan" if x is None or not math.isfinite(x) else f"{x:.17g}"


@dataclass
class ExperimentTable:
    rows: list

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow(r.cells())
        return buf.getvalue()

    def write_csv(self, path):
        Path(path).write_text(self.to_csv())

    def lookup(self, method, kernel, k):
        kernel = kernels.parse_kernel(kernel).designation
        for r in self.rows:
            if (r.method, r.kernel, r.k) == (method, kernel, k):
                return r
        raise KeyError((method, kernel, k))

    @classmethod
    def read_csv(cls, path):
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != CSV_HEADER:
                raise InvalidInputError(f"{path} does not have the sweep CSV header")
            rows = [
                ExperimentRow(
                    method=d["method"],
                    kernel=d["kernel"],
                    k=int(d["k"]),
                    eps_train=float(d["eps_train"]),
                    eps_test=float(d["eps_test"]),
                    fit_seconds=float(d["fit_seconds"]),
                    preimage_convergence_rate=float(d["preimage_convergence_rate"]),
                    status=d["status"],
                )
                for d in reader
            ]
        return cls(rows)


def _resolve_data(data):
    if isinstance(data, (str, Path)):
        return synthgen.load_dataset(data)
    if isinstance(data, tuple) and len(data) == 2 and isinstance(data[0], core.SnapshotSet):
        return data
    grid, cfg = data
    return synthgen.generate_dataset(grid, cfg)


def _evaluate(predict_fn, train, test):
    eps_train = epsilon(predict_fn(train.X), train.Y)
    eps_test = epsilon(predict_fn(test.X), test.Y) if test is not None else math.nan
    return eps_train, eps_test


def _okdmd_cell(cfg, method, kernel, k, train, test):
    t0 = time.perf_counter()
    if method == "lowrank":
        model = baselines.lowrank_dmd_fit(train, k, cfg.rank_tol)
    else:
        model = core.fit(train, kernel, k, cfg.rank_tol)
    elapsed = time.perf_counter() - t0
    diagnostics = []
    # the linear inverse is exact, so low-rank DMD never needs the solver
    mode = "closed_form" if method == "lowrank" else cfg.inverse_mode

    def predict_fn(theta):
        return core.predict(model, theta, 2, mode, cfg.solver_options, diagnostics)

    eps_train, eps_test = _evaluate(predict_fn, train, test)
    rate = math.nan
    if diagnostics:
        rate = sum(d.converged for d in diagnostics) / len(diagnostics)
    return eps_train, eps_test, elapsed, rate


def _row(cfg, method, kernel, k, train, test, kdmd_models):
    label = "linear" if method == "lowrank" else kernel
    try:
        if k > train.m:
            raise InvalidInputError(f"rank {k} exceeds the number of snapshot pairs {train.m}")
        if method == "kdmd":
            model, elapsed = kdmd_models[kernel]
            if isinstance(model, OKDMDError):
                raise model
            eps_train, eps_test = _evaluate(lambda th: baselines.kdmd_predict(model, th, 2, k), train, test)
            rate = math.nan
        else:
            eps_train, eps_test, elapsed, rate = _okdmd_cell(cfg, method, kernel, k, train, test)
    except (OKDMDError, np.linalg.LinAlgError) as exc:
        code = getattr(exc, "code", "numerical_failure")
        return ExperimentRow(method, label, k, math.nan, math.nan, status=code)
    return ExperimentRow(
        method=method,
        kernel=label,
        k=k,
        eps_train=eps_train,
        eps_test=eps_test,
        fit_seconds=elapsed if cfg.timing else math.nan,
        preimage_convergence_rate=rate,
    )


def _fit_kdmd(train, kernel, rank_tol):
    t0 = time.perf_counter()
    try:
        model = baselines.kdmd_fit(train, kernel, rank_tol)
    except OKDMDError as exc:
        return exc, 0.0
    return model, time.perf_counter() - t0


def sweep(cfg):
    """Run every (method, kernel, k) cell of ``cfg``.

    K-DMD is fitted once per kernel and truncated per rank; the optimal
    model is refitted for each rank. Low-rank DMD ignores the kernel list
    and contributes one row per rank. Cell failures are reported in the
    ``status`` column. Row order is fixed by the configuration, whatever
    the number of workers.
    """
    train, test = _resolve_data(cfg.data)
    cells = []
    for method in cfg.methods:
        kern_list = ("linear",) if method == "lowrank" else cfg.kernels
        for kernel in kern_list:
            for k in cfg.ranks:
                cells.append((method, kernel, k))

    kdmd_kernels = sorted({kern for method, kern, _ in cells if method == "kdmd"})
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        fitted = list(pool.map(lambda kern: _fit_kdmd(train, kern, cfg.rank_tol), kdmd_kernels))
        kdmd_models = dict(zip(kdmd_kernels, fitted))
        rows = list(pool.map(lambda c: _row(cfg, *c, train, test, kdmd_models), cells))

    table = ExperimentTable(rows)
    if cfg.out is not None:
        Path(cfg.out).mkdir(parents=True, exist_ok=True)
        table.write_csv(Path(cfg.out) / "sweep.csv")
    return table


def oracle_check(data, kernel, k, rank_tol=core.DEFAULT_RANK_TOL):
    """Compare the Gram-only pipeline with the explicit-coordinate construction.

    Evaluation points are the test inputs when present, else the training
    inputs.

    Returns:
        okdmd.oracle.OracleReport
    """
    train, test = _resolve_data(data)
    model = core.fit(train, kernel, k, rank_tol)
    thetas = test.X if test is not None else train.X
    return oracle.compare(model, train, thetas)


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def render_svg(table, width=640, height=420):
    """Log-scale error-vs-rank plot; training errors solid, testing dashed."""
    series = {}
    for r in table.rows:
        series.setdefault((r.method, r.kernel), []).append(r)
    vals = [v for r in table.rows for v in (r.eps_train, r.eps_test) if math.isfinite(v) and v > 0]
    ks = [r.k for r in table.rows]
    if not vals:
        vals = [1.0]
    lo, hi = math.floor(math.log10(min(vals))), math.ceil(math.log10(max(vals)))
    if hi == lo:
        hi += 1
    kmin, kmax = min(ks, default=0), max(ks, default=1)
    if kmax == kmin:
        kmax += 1
    left, right, top, bottom = 70, 170, 20, 50
    pw, ph = width - left - right, height - top - bottom

    def sx(k):
        return left + pw * (k - kmin) / (kmax - kmin)

    def sy(v):
        return top + ph * (hi - math.log10(v)) / (hi - lo)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for e in range(lo, hi + 1):
        y = sy(10.0**e)
        out.append(f'<line x1="{left}" y1="{y:.1f}" x2="{left + pw}" y2="{y:.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{left - 6}" y="{y + 4:.1f}" text-anchor="end">1e{e}</text>')
    for k in sorted(set(ks)):
        out.append(f'<text x="{sx(k):.1f}" y="{top + ph + 16}" text-anchor="middle">{k}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">rank k</text>')
    for idx, ((method, kern), rows) in enumerate(series.items()):
        color = _PALETTE[idx % len(_PALETTE)]
        for attr, dash in (("eps_train", ""), ("eps_test", ' stroke-dasharray="5,3"')):
            pts = [(sx(r.k), sy(getattr(r, attr))) for r in rows if math.isfinite(getattr(r, attr)) and getattr(r, attr) > 0]
            if pts:
                path = " ".join(f"{x:.1f},{y:.1f}" for x, y in pts)
                out.append(f'<polyline points="{path}" fill="none" stroke="{color}"{dash}/>')
        ly = top + 14 * (idx + 1)
        out.append(f'<line x1="{left + pw + 10}" y1="{ly - 4}" x2="{left + pw + 30}" y2="{ly - 4}" stroke="{color}"/>')
        out.append(f'<text x="{left + pw + 34}" y="{ly}">{method} ({kern})</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
