"""Replication studies: convergence, budget-matched MSE, dimension scaling,
and tabulation of the closed-form limiting variances. Results are emitted as
CSV (primary artifact) and standalone SVG plots (convenience).

Budget parity: with a total call budget n and p inputs, the rank route uses
one n-sample for all indices while the Pick-Freeze route gets N = n // (p+1)
rows per index (a shared base sample plus p frozen samples costs (p+1) N).
Replications use independent derived substreams and are aggregated in
replication order, so results are reproducible bit for bit regardless of
worker count. The worker count is capped by the SENSIKIT_THREADS environment
variable (0 or unset picks a serial run / automatic count respectively).
"""

from __future__ import annotations

import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .asymptotics import v_eff, v_pf, v_rank
from .exceptions import UsageError
from .models import ModelSpec, make_model
from .pickfreeze import sn_value, tn_value
from .ranks import rank_sobol_indices
from .sampling import derive_stream, sample_iid, sample_pickfreeze_panel

_FMT = "%.17g"  # lossless round-trip float formatting


@dataclass
class ExperimentConfig:
    """Fully resolved study description.

    sizes are Pick-Freeze sample sizes N (the rank route runs at (p+1) N);
    budget is the total call budget for MSE-type studies; p_grid and
    alpha_grid drive the dimension and variance-comparison studies.
    """

    study: str
    model: str = "gfunction"
    model_params: dict = field(default_factory=dict)
    sizes: Sequence[int] = ()
    replications: int = 1
    budget: Optional[int] = None
    seed: int = 0
    output_dir: Optional[str] = None
    p_grid: Sequence[int] = ()
    alpha_grid: Sequence[float] = ()
    pf_estimator: Optional[str] = None  # "sn" or "tn"; study-specific default

    def __post_init__(self):
        if self.study not in ("convergence", "mse", "dimension", "variance_compare"):
            raise UsageError(f"unknown study {self.study!r}")
        if self.replications < 1:
            raise UsageError("replications must be >= 1")
        sizes = tuple(int(s) for s in self.sizes)
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise UsageError("sizes must be strictly increasing")
        self.sizes = sizes
        if self.pf_estimator not in (None, "sn", "tn"):
            raise UsageError("pf_estimator must be 'sn' or 'tn'")


@dataclass
class ConvergenceReport:
    """Estimates against exact references on a grid of sample sizes.

    Rows are (method, index, size, estimate, exact, abs_error) where size
    is the method's own sample size and estimate / abs_error are averages
    over the replications.
    """

    model: str
    seed: int
    rows: List[tuple]
    study: str = "convergence"


@dataclass
class MseReport:
    """Squared-error statistics per index and method at a fixed budget."""

    model: str
    seed: int
    budget: int
    replications: int
    rows: List[tuple]  # (method, index, mse_mean, mse_median, mse_stdev)
    samples: Optional[dict] = None  # (method, index) -> raw squared errors
    study: str = "mse"


@dataclass
class VarianceTable:
    """Closed-form limiting variances on an (alpha, p) grid."""

    seed: int
    rows: List[tuple]  # (alpha, p, index, v_pf, v_rank, v_eff)
    study: str = "variance_compare"


def _threads() -> int:
    raw = os.environ.get("SENSIKIT_THREADS", "1")
    try:
        val = int(raw)
    except ValueError:
        val = 1
    if val == 0:
        return os.cpu_count() or 1
    return max(1, val)


def _map_replications(fn, n_reps: int):
    """Run replications (possibly concurrently) and return results in order."""
    workers = _threads()
    if workers == 1:
        return [fn(r) for r in range(n_reps)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n_reps)))


def _resolve_model(config: ExperimentConfig) -> ModelSpec:
    model = make_model(config.model, **config.model_params)
    return model


def _require_exact(model: ModelSpec) -> np.ndarray:
    if model.exact_sobol is None:
        raise UsageError(f"model {model.name or '<custom>'} has no exact reference indices")
    return np.asarray(model.exact_sobol)


def _pf_indices(model: ModelSpec, n_pf: int, stream, estimator: str) -> np.ndarray:
    panel = sample_pickfreeze_panel(model, n_pf, stream)
    stat = sn_value if estimator == "sn" else tn_value
    return np.array([stat(panel.y, panel.y_frozen[:, i]) for i in range(panel.p)])


def run_convergence(config: ExperimentConfig) -> ConvergenceReport:
    """Estimates of all first-order indices on a grid of sizes N.

    Per grid point the Pick-Freeze route runs at N rows per index and the
    rank route at the budget-equivalent n = (p+1) N single sample.
    """
    model = _resolve_model(config)
    exact = _require_exact(model)
    if not config.sizes:
        raise UsageError("convergence study needs a non-empty size grid")
    estimator = config.pf_estimator or "tn"
    p = model.p
    rows = []
    for n_pf in config.sizes:
        n_rank = (p + 1) * n_pf

        def one(rep, n_pf=n_pf, n_rank=n_rank):
            stream = derive_stream(config.seed, f"convergence:N={n_pf}", rep)
            design = sample_iid(model, n_rank, stream)
            rank_est = rank_sobol_indices(design.x, design.y)
            pf_stream = derive_stream(config.seed, f"convergence:pf:N={n_pf}", rep)
            pf_est = _pf_indices(model, n_pf, pf_stream, estimator)
            return rank_est, pf_est

        results = _map_replications(one, config.replications)
        rank_all = np.array([r[0] for r in results])
        pf_all = np.array([r[1] for r in results])
        for i in range(p):
            rows.append(("rank", i + 1, n_rank,
                         float(rank_all[:, i].mean()),
                         float(exact[i]),
                         float(np.abs(rank_all[:, i] - exact[i]).mean())))
            rows.append(("pf", i + 1, n_pf,
                         float(pf_all[:, i].mean()),
                         float(exact[i]),
                         float(np.abs(pf_all[:, i] - exact[i]).mean())))
    return ConvergenceReport(model=model.name or config.model, seed=config.seed, rows=rows)


def _mse_rows(se_rank: np.ndarray, se_pf: np.ndarray) -> tuple:
    rows = []
    samples = {}
    p = se_rank.shape[1]
    for method, se in (("rank", se_rank), ("pf", se_pf)):
        for i in range(p):
            col = se[:, i]
            rows.append((method, i + 1, float(col.mean()), float(np.median(col)),
                         float(col.std(ddof=1))))
            samples[(method, i + 1)] = col.copy()
    return rows, samples


def run_mse(config: ExperimentConfig, label: Optional[str] = None) -> MseReport:
    """Budget-matched squared-error comparison at a fixed total budget.

    The rank route uses the whole budget as one sample; the Pick-Freeze
    route gets N = budget // (p+1) rows per index.
    """
    model = _resolve_model(config)
    exact = _require_exact(model)
    if config.budget is None:
        raise UsageError("mse study needs a budget")
    if config.replications < 100:
        raise UsageError("mse study needs at least 100 replications for stable statistics")
    p = model.p
    n_rank = int(config.budget)
    n_pf = n_rank // (p + 1)
    if n_pf < 2:
        raise UsageError(f"budget {config.budget} too small: N = budget // (p+1) = {n_pf} < 2")
    estimator = config.pf_estimator or "sn"
    label = label or f"mse:budget={config.budget}:p={p}"

    def one(rep):
        stream = derive_stream(config.seed, label, rep)
        design = sample_iid(model, n_rank, stream)
        rank_est = rank_sobol_indices(design.x, design.y)
        pf_stream = derive_stream(config.seed, label + ":pf", rep)
        pf_est = _pf_indices(model, n_pf, pf_stream, estimator)
        return (rank_est - exact) ** 2, (pf_est - exact) ** 2

    results = _map_replications(one, config.replications)
    se_rank = np.array([r[0] for r in results])
    se_pf = np.array([r[1] for r in results])
    rows, samples = _mse_rows(se_rank, se_pf)
    return MseReport(model=model.name or config.model, seed=config.seed,
                     budget=n_rank, replications=config.replications,
                     rows=rows, samples=samples)


def run_dimension(config: ExperimentConfig) -> List[MseReport]:
    """Budget-matched MSE study repeated over a grid of input dimensions.

    Dimensions for which N = budget // (p+1) < 2 are skipped with a warning
    on stderr. The g-function grows coefficients a_i = i with the dimension;
    the linear model keeps its alpha.
    """
    if config.budget is None:
        raise UsageError("dimension study needs a budget")
    if not config.p_grid:
        raise UsageError("dimension study needs a p grid")
    reports = []
    for p in config.p_grid:
        if int(config.budget) // (p + 1) < 2:
            print(f"warning: skipping p={p}: budget {config.budget} gives N < 2",
                  file=sys.stderr)
            continue
        params = dict(config.model_params)
        if config.model == "gfunction":
            params["a"] = tuple(range(1, p + 1))
        elif config.model == "linear":
            params["p"] = p
        sub = ExperimentConfig(
            study="mse", model=config.model, model_params=params,
            replications=config.replications, budget=config.budget,
            seed=config.seed, pf_estimator=config.pf_estimator,
        )
        reports.append(run_mse(sub, label=f"dimension:p={p}:budget={config.budget}"))
    return reports


def run_variance_compare(config: ExperimentConfig) -> VarianceTable:
    """Tabulate the closed-form limiting variances on an (alpha, p) grid.

    Linear model only; emits entries for index 1 (the weighted coordinate)
    and index 2 (representative of the exchangeable rest).
    """
    if config.model != "linear":
        raise UsageError("variance comparison is defined for the linear model only")
    alphas = tuple(config.alpha_grid) or tuple(np.round(np.arange(0.1, 4.01, 0.1), 10))
    ps = tuple(config.p_grid) or tuple(range(2, 8))
    rows = []
    for p in ps:
        for alpha in alphas:
            pf = v_pf(alpha, p)
            rk = v_rank(alpha, p)
            ef = v_eff(alpha, p)
            for idx in (1, 2):
                rows.append((float(alpha), int(p), idx,
                             float(pf[idx - 1]), float(rk[idx - 1]), float(ef[idx - 1])))
    return VarianceTable(seed=config.seed, rows=rows)


# ---------------------------------------------------------------------------
# CSV emission
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, float):
        return _FMT % x
    return str(x)


def emit_csv(report, path) -> Path:
    """Write a report as UTF-8, LF-terminated CSV with a header row.

    Floats carry 17 significant digits so parsing the file back yields
    bit-identical values.
    """
    path = Path(path)
    if isinstance(report, ConvergenceReport):
        header = "study,model,method,index,n_or_N,estimate,exact,abs_error,seed"
        lines = [",".join([report.study, report.model, m, str(i), str(n)]
                          + [_fmt(v) for v in (est, exact, err)] + [str(report.seed)])
                 for (m, i, n, est, exact, err) in report.rows]
    elif isinstance(report, MseReport):
        header = "study,model,method,index,budget,replications,mse_mean,mse_median,mse_stdev,seed"
        lines = [",".join([report.study, report.model, m, str(i), str(report.budget),
                           str(report.replications)]
                          + [_fmt(v) for v in (mean, med, sd)] + [str(report.seed)])
                 for (m, i, mean, med, sd) in report.rows]
    elif isinstance(report, VarianceTable):
        header = "alpha,p,index,v_pf,v_rank,v_eff,seed"
        lines = [",".join([_fmt(a), str(p), str(i)] + [_fmt(v) for v in (pf, rk, ef)]
                          + [str(report.seed)])
                 for (a, p, i, pf, rk, ef) in report.rows]
    else:
        raise TypeError(f"cannot emit {type(report).__name__} as CSV")
    text = header + "\n" + "".join(line + "\n" for line in lines)
    path.write_bytes(text.encode("utf-8"))
    return path


# ---------------------------------------------------------------------------
# SVG emission (no plotting dependency; deterministic bytes)
# ---------------------------------------------------------------------------

_W, _H = 720.0, 480.0
_ML, _MR, _MT, _MB = 70.0, 20.0, 20.0, 50.0
_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
           "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78"]


def _scale(vals, lo, hi, a, b):
    vals = np.asarray(vals, dtype=float)
    if hi == lo:
        return np.full_like(vals, (a + b) / 2.0)
    return a + (vals - lo) / (hi - lo) * (b - a)


def _svg_open(parts):
    parts.append('<?xml version="1.0" encoding="UTF-8"?>')
    parts.append(f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
                 f'width="{_W:.0f}" height="{_H:.0f}" viewBox="0 0 {_W:.0f} {_H:.0f}">')
    parts.append(f'<rect x="0" y="0" width="{_W:.0f}" height="{_H:.0f}" fill="white"/>')
    parts.append(f'<rect x="{_ML:.1f}" y="{_MT:.1f}" width="{_W-_ML-_MR:.1f}" '
                 f'height="{_H-_MT-_MB:.1f}" fill="none" stroke="black" stroke-width="1"/>')


def _polyline(parts, xs, ys, color):
    pts = " ".join(f"{x:.3f},{y:.3f}" for x, y in zip(xs, ys))
    parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')


def _axis_ticks(parts, xticks, xlabels, yticks, ylabels):
    for x, lab in zip(xticks, xlabels):
        parts.append(f'<line x1="{x:.3f}" y1="{_H-_MB:.1f}" x2="{x:.3f}" '
                     f'y2="{_H-_MB+5:.1f}" stroke="black" stroke-width="1"/>')
        parts.append(f'<text x="{x:.3f}" y="{_H-_MB+18:.1f}" font-size="11" '
                     f'text-anchor="middle">{lab}</text>')
    for y, lab in zip(yticks, ylabels):
        parts.append(f'<line x1="{_ML-5:.1f}" y1="{y:.3f}" x2="{_ML:.1f}" '
                     f'y2="{y:.3f}" stroke="black" stroke-width="1"/>')
        parts.append(f'<text x="{_ML-8:.1f}" y="{y+4:.3f}" font-size="11" '
                     f'text-anchor="end">{lab}</text>')


def _line_chart(series, log_x=False):
    """series: list of (label, xs, ys, color). Returns SVG text."""
    all_x = np.concatenate([np.asarray(s[1], dtype=float) for s in series])
    all_y = np.concatenate([np.asarray(s[2], dtype=float) for s in series])
    tx = np.log10(all_x) if log_x else all_x
    x_lo, x_hi = float(tx.min()), float(tx.max())
    y_lo, y_hi = float(all_y.min()), float(all_y.max())
    if y_lo == y_hi:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    parts = []
    _svg_open(parts)
    xticks_v = np.unique(tx)
    if len(xticks_v) > 8:
        xticks_v = np.linspace(x_lo, x_hi, 6)
    xt = _scale(xticks_v, x_lo, x_hi, _ML, _W - _MR)
    # tick positions move under the log transform, labels show the raw value
    xlabels = [(_FMT % (10**v if log_x else v))[:8] for v in xticks_v]
    yticks_v = np.linspace(y_lo, y_hi, 6)
    yt = _scale(yticks_v, y_lo, y_hi, _H - _MB, _MT)
    _axis_ticks(parts, xt, xlabels, yt, [("%.4g" % v) for v in yticks_v])
    for k, (label, xs, ys, color) in enumerate(series):
        sx = np.log10(np.asarray(xs, dtype=float)) if log_x else np.asarray(xs, dtype=float)
        px = _scale(sx, x_lo, x_hi, _ML, _W - _MR)
        py = _scale(np.asarray(ys, dtype=float), y_lo, y_hi, _H - _MB, _MT)
        _polyline(parts, px, py, color)
        parts.append(f'<text x="{_W-_MR-5:.1f}" y="{_MT+14*(k+1):.1f}" font-size="11" '
                     f'text-anchor="end" fill="{color}">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _box_chart(groups):
    """groups: list of (label, samples). Box, 1.5 IQR whiskers, outlier dots."""
    stats = []
    for label, vals in groups:
        v = np.sort(np.asarray(vals, dtype=float))
        q1, med, q3 = np.percentile(v, [25, 50, 75])
        iqr = q3 - q1
        lo_w = v[v >= q1 - 1.5 * iqr].min()
        hi_w = v[v <= q3 + 1.5 * iqr].max()
        outliers = v[(v < lo_w) | (v > hi_w)]
        stats.append((label, q1, med, q3, lo_w, hi_w, outliers))
    all_vals = np.concatenate([np.asarray(v, dtype=float) for _, v in groups])
    y_lo, y_hi = float(all_vals.min()), float(all_vals.max())
    if y_lo == y_hi:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    parts = []
    _svg_open(parts)
    n = len(stats)
    width = (_W - _ML - _MR) / max(n, 1)
    yticks_v = np.linspace(y_lo, y_hi, 6)
    yt = _scale(yticks_v, y_lo, y_hi, _H - _MB, _MT)
    _axis_ticks(parts, [], [], yt, [("%.4g" % v) for v in yticks_v])

    def sy(v):
        return float(_scale(np.array([v]), y_lo, y_hi, _H - _MB, _MT)[0])

    for k, (label, q1, med, q3, lo_w, hi_w, outliers) in enumerate(stats):
        cx = _ML + width * (k + 0.5)
        half = width * 0.3
        parts.append(f'<rect x="{cx-half:.3f}" y="{sy(q3):.3f}" width="{2*half:.3f}" '
                     f'height="{sy(q1)-sy(q3):.3f}" fill="none" stroke="black"/>')
        parts.append(f'<line x1="{cx-half:.3f}" y1="{sy(med):.3f}" x2="{cx+half:.3f}" '
                     f'y2="{sy(med):.3f}" stroke="black" stroke-width="2"/>')
        for w_val, q_ref in ((lo_w, q1), (hi_w, q3)):
            parts.append(f'<line x1="{cx:.3f}" y1="{sy(q_ref):.3f}" x2="{cx:.3f}" '
                         f'y2="{sy(w_val):.3f}" stroke="black" stroke-dasharray="3,2"/>')
            parts.append(f'<line x1="{cx-half/2:.3f}" y1="{sy(w_val):.3f}" '
                         f'x2="{cx+half/2:.3f}" y2="{sy(w_val):.3f}" stroke="black"/>')
        for ov in outliers:
            parts.append(f'<circle cx="{cx:.3f}" cy="{sy(ov):.3f}" r="2" fill="black"/>')
        parts.append(f'<text x="{cx:.3f}" y="{_H-_MB+18:.1f}" font-size="11" '
                     f'text-anchor="middle">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_svg(report, path, log_x: bool = False) -> Path:
    """Render a report as a standalone SVG 1.1 document.

    Convergence and variance tables become line charts (optionally with a
    log-scale x axis); MSE reports with raw per-replication errors become
    box plots. Output bytes are a pure function of the report.
    """
    path = Path(path)
    if isinstance(report, ConvergenceReport):
        if not report.rows:
            raise ValueError("cannot plot an empty report")
        series = []
        keys = sorted({(m, i) for (m, i, *_rest) in report.rows})
        for k, (m, i) in enumerate(keys):
            pts = [(n, est) for (mm, ii, n, est, _ex, _err) in report.rows
                   if mm == m and ii == i]
            pts.sort()
            series.append((f"{m} S{i}", [p[0] for p in pts], [p[1] for p in pts],
                           _COLORS[k % len(_COLORS)]))
        text = _line_chart(series, log_x=log_x)
    elif isinstance(report, MseReport):
        if not report.rows:
            raise ValueError("cannot plot an empty report")
        if report.samples:
            groups = [(f"{m} S{i}", report.samples[(m, i)])
                      for (m, i, *_r) in report.rows if (m, i) in report.samples]
            text = _box_chart(groups)
        else:
            series = []
            for k, method in enumerate(("rank", "pf")):
                pts = [(i, mean) for (m, i, mean, _md, _sd) in report.rows if m == method]
                pts.sort()
                series.append((method, [p[0] for p in pts], [p[1] for p in pts],
                               _COLORS[k]))
            text = _line_chart(series, log_x=False)
    elif isinstance(report, VarianceTable):
        if not report.rows:
            raise ValueError("cannot plot an empty report")
        series = []
        keys = sorted({(p, i) for (_a, p, i, *_r) in report.rows})
        for k, (p, i) in enumerate(keys):
            sub = sorted((a, pf, rk, ef) for (a, pp, ii, pf, rk, ef) in report.rows
                         if pp == p and ii == i)
            xs = [s[0] for s in sub]
            series.append((f"pf p={p} S{i}", xs, [s[1] for s in sub],
                           _COLORS[(2 * k) % len(_COLORS)]))
            series.append((f"rank p={p} S{i}", xs, [s[2] for s in sub],
                           _COLORS[(2 * k + 1) % len(_COLORS)]))
        text = _line_chart(series, log_x=log_x)
    else:
        raise TypeError(f"cannot emit {type(report).__name__} as SVG")
    path.write_bytes(text.encode("utf-8"))
    return path
