"""Command-line front end.

Subcommands: ``estimate`` (indices from a named model or a CSV data file),
``study`` (replication studies with CSV/SVG output) and ``ci`` (estimate
with an asymptotic confidence interval). Every run is a pure function of
its arguments, config file and input files; reruns produce byte-identical
output. Exit codes: 0 ok, 2 usage or config error, 3 degenerate data,
4 output I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import approx_sigma_from_sample, confidence_interval, sigma_plugin
from .exceptions import DegenerateDataError, UsageError
from .experiments import (ExperimentConfig, emit_csv, emit_svg, run_convergence,
                          run_dimension, run_mse, run_variance_compare)
from .models import make_model
from .pickfreeze import EstimateResult, cvm_value, sn_value, tn_value
from .ranks import rank_cvm_indices, rank_sobol_indices, tie_columns
from .sampling import RngStream, sample_iid, sample_inputs, sample_pickfreeze_panel

METHODS = ("rank-sobol", "rank-cvm", "pf-sn", "pf-tn", "pf-cvm")


def _parse_int_list(value):
    if isinstance(value, (list, tuple)):
        return tuple(int(v) for v in value)
    return tuple(int(t) for t in str(value).split(",") if t != "")


def _parse_p_spec(value):
    """Accept 6, "6,10,15" or "2..7"."""
    if isinstance(value, (list, tuple)):
        return tuple(int(v) for v in value)
    text = str(value)
    if ".." in text:
        lo, hi = text.split("..")
        return tuple(range(int(lo), int(hi) + 1))
    return _parse_int_list(text)


def _parse_grid(value):
    """Accept "a:b:step" or a comma list of floats."""
    if isinstance(value, (list, tuple)):
        return tuple(float(v) for v in value)
    text = str(value)
    if ":" in text:
        a, b, step = (float(t) for t in text.split(":"))
        count = int(round((b - a) / step)) + 1
        return tuple(np.round(np.linspace(a, a + step * (count - 1), count), 12))
    return tuple(float(t) for t in text.split(",") if t != "")


def _build_parser():
    top = argparse.ArgumentParser(prog="sensikit",
                                  description="Sensitivity indices from single samples "
                                              "or Pick-Freeze designs")
    top.add_argument("--version", action="version", version=f"sensikit {__version__}")
    sub = top.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file with flag defaults (flags win)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--model", default=None, help="gfunction | linear | registered name")
        p.add_argument("--a", default=None, help="g-function coefficients, e.g. 1,2,3")
        p.add_argument("--alpha", type=float, default=None)
        p.add_argument("--p", default=None)

    est = sub.add_parser("estimate", help="print per-index estimates")
    common(est)
    est.add_argument("--method", choices=METHODS, default=None)
    est.add_argument("--n", type=int, default=None)
    est.add_argument("--data", default=None, help="CSV with columns x1..xp,y")
    est.add_argument("--clip", type=float, default=None)

    st = sub.add_parser("study", help="run a replication study, write CSV/SVG")
    st.add_argument("kind", choices=["convergence", "mse", "dimension", "variance-compare"])
    common(st)
    st.add_argument("--budget", type=int, default=None)
    st.add_argument("--reps", type=int, default=None)
    st.add_argument("--sizes", default=None, help="comma list of sizes N")
    st.add_argument("--p-grid", dest="p_grid", default=None)
    st.add_argument("--alpha-grid", dest="alpha_grid", default=None)
    st.add_argument("--pf-estimator", dest="pf_estimator", choices=["sn", "tn"], default=None)
    st.add_argument("--out", default=None, help="output directory")
    st.add_argument("--svg", action="store_true", default=None)

    ci = sub.add_parser("ci", help="index of the first input (x1) with an "
                                   "asymptotic confidence interval")
    common(ci)
    ci.add_argument("--n", type=int, default=None)
    ci.add_argument("--n-mc", dest="n_mc", type=int, default=None)
    ci.add_argument("--level", type=float, default=None)
    ci.add_argument("--approx", action="store_true", default=None,
                    help="plug-in variance from the sample itself (approximate)")
    ci.add_argument("--data", default=None)
    return top


def _merge_config(args):
    if getattr(args, "config", None):
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as e:
            raise UsageError(f"cannot read config file: {e}")
        except json.JSONDecodeError as e:
            raise UsageError(f"config file is not valid JSON: {e}")
        if not isinstance(doc, dict):
            raise UsageError("config file must hold a JSON object")
        for key, val in doc.items():
            attr = key.replace("-", "_")
            if not hasattr(args, attr):
                raise UsageError(f"unknown config key {key!r}")
            if getattr(args, attr) is None:
                setattr(args, attr, val)
    return args


def _resolve_model(args):
    name = args.model
    if name is None:
        raise UsageError("a model is required (--model), or pass --data")
    if name == "gfunction":
        if args.a is None:
            raise UsageError("gfunction needs --a coefficients")
        a = args.a if isinstance(args.a, (list, tuple)) else _parse_grid(str(args.a))
        return make_model("gfunction", a=tuple(a))
    if name == "linear":
        if args.alpha is None or args.p is None:
            raise UsageError("linear model needs --alpha and --p")
        return make_model("linear", alpha=float(args.alpha), p=int(str(args.p)))
    try:
        return make_model(name)
    except KeyError as e:
        raise UsageError(str(e))


def _read_data_csv(path):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise UsageError(f"{path}: empty file")
            rows = [row for row in reader if row]
    except OSError as e:
        raise UsageError(f"cannot read data file: {e}")
    p = len(header) - 1
    expected = [f"x{i}" for i in range(1, p + 1)] + ["y"]
    for col in expected:
        if col not in header:
            raise UsageError(f"{path}: missing column {col!r} (header row x1..xp,y required)")
    if list(header) != expected:
        raise UsageError(f"{path}: columns must appear in order x1..x{p},y")
    try:
        data = np.array([[float(v) for v in row] for row in rows])
    except ValueError as e:
        raise UsageError(f"{path}: non-numeric value ({e})")
    if data.ndim != 2 or data.shape[1] != p + 1 or len(data) < 2:
        raise UsageError(f"{path}: need at least 2 complete rows of {p + 1} columns")
    return data[:, :p], data[:, p]


def _warn_ties(X):
    cols = tie_columns(X)
    if cols:
        names = ", ".join(f"x{i}" for i in cols)
        print(f"warning: tied values in {names}; ranks use stable order by row",
              file=sys.stderr)


def _apply_clip(y, clip):
    """Symmetric clamp at +-clip for the unbounded-output safeguard."""
    if clip is None:
        return y
    if clip <= 0:
        raise UsageError("--clip must be positive")
    return np.clip(y, -clip, clip)


def _print_indices(method, values, n, evaluations):
    print(f"# method={method} n={n} evaluations={evaluations}")
    print("index,estimate")
    for i, v in enumerate(values, start=1):
        print(f"{i},{v:.10g}")


def cmd_estimate(args) -> int:
    method = args.method or "rank-sobol"
    if args.data is not None:
        if method.startswith("pf-"):
            raise UsageError("Pick-Freeze methods need a model; "
                             "--data supports rank-sobol and rank-cvm")
        X, y = _read_data_csv(args.data)
        _warn_ties(X)
        y = _apply_clip(y, args.clip)
        fn = rank_sobol_indices if method == "rank-sobol" else rank_cvm_indices
        _print_indices(method, fn(X, y), len(y), 0)
        return 0

    model = _resolve_model(args)
    if args.n is None:
        raise UsageError("model-based estimation needs --n")
    n = int(args.n)
    seed = int(args.seed or 0)
    stream = RngStream(seed, 0)
    if method in ("rank-sobol", "rank-cvm"):
        design = sample_iid(model, n, stream)
        y = _apply_clip(design.y, args.clip)
        fn = rank_sobol_indices if method == "rank-sobol" else rank_cvm_indices
        _print_indices(method, fn(design.x, y), n, design.evaluations)
        return 0
    panel = sample_pickfreeze_panel(model, n, stream)
    if method == "pf-cvm":
        gen = RngStream(seed, 1).generator()
        w = model.evaluate_batch(sample_inputs(model, n, gen))
        vals = [cvm_value(panel.y, panel.y_frozen[:, i], w) for i in range(model.p)]
        _print_indices(method, vals, n, panel.evaluations + n)
        return 0
    stat = sn_value if method == "pf-sn" else tn_value
    vals = [stat(panel.y, panel.y_frozen[:, i]) for i in range(model.p)]
    _print_indices(method, vals, n, panel.evaluations)
    return 0


def cmd_study(args) -> int:
    kind = args.kind.replace("-", "_")
    seed = int(args.seed or 0)
    out_dir = Path(args.out or ".")
    model = args.model or ("linear" if kind == "variance_compare" else "gfunction")
    params = {}
    if model == "gfunction":
        if args.a is not None:
            a = args.a if isinstance(args.a, (list, tuple)) else _parse_grid(str(args.a))
            params["a"] = tuple(a)
        elif args.p is not None and kind != "dimension":
            params["a"] = tuple(range(1, int(str(args.p)) + 1))
        elif kind in ("convergence", "mse"):
            raise UsageError("gfunction studies need --a or --p")
    elif model == "linear":
        if kind != "variance_compare":
            if args.alpha is None or args.p is None:
                raise UsageError("linear studies need --alpha and --p")
            params = {"alpha": float(args.alpha), "p": int(str(args.p))}

    config = ExperimentConfig(
        study=kind,
        model=model,
        model_params=params,
        sizes=_parse_int_list(args.sizes) if args.sizes else (),
        replications=int(args.reps or 1),
        budget=int(args.budget) if args.budget is not None else None,
        seed=seed,
        output_dir=str(out_dir),
        p_grid=_parse_p_spec(args.p_grid) if args.p_grid else
               (_parse_p_spec(args.p) if (args.p and kind in ("dimension", "variance_compare")) else ()),
        alpha_grid=_parse_grid(args.alpha_grid) if args.alpha_grid else (),
        pf_estimator=args.pf_estimator,
    )

    if kind == "convergence":
        reports = [run_convergence(config)]
        names = ["convergence"]
    elif kind == "mse":
        reports = [run_mse(config)]
        names = ["mse"]
    elif kind == "dimension":
        reports = run_dimension(config)
        names = [f"dimension_p{len([row for row in r.rows if row[0] == 'rank'])}"
                 for r in reports]
    else:
        reports = [run_variance_compare(config)]
        names = ["variance_compare"]

    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, report in zip(names, reports):
            path = emit_csv(report, out_dir / f"{name}.csv")
            print(f"wrote {path} ({len(report.rows)} rows)")
            if args.svg:
                svg_path = emit_svg(report, out_dir / f"{name}.svg",
                                    log_x=(kind == "convergence"))
                print(f"wrote {svg_path}")
    except OSError as e:
        print(f"error: cannot write output: {e}", file=sys.stderr)
        return 4
    return 0


def cmd_ci(args) -> int:
    level = float(args.level if args.level is not None else 0.95)
    if not 0.0 < level < 1.0:
        raise UsageError("confidence level must lie strictly between 0 and 1")
    seed = int(args.seed or 0)

    if args.data is not None:
        X, y = _read_data_csv(args.data)
        _warn_ties(X)
        if not args.approx:
            raise DegenerateDataError("variance estimation from a data file needs --approx")
        comp = approx_sigma_from_sample(X[:, 0], y)
        value = float(rank_sobol_indices(X[:, :1], y)[0])
        est = EstimateResult(value=value, n=len(y), evaluations=0, method="rank-sobol")
    else:
        model = _resolve_model(args)
        if args.n is None:
            raise UsageError("model-based ci needs --n")
        n = int(args.n)
        design = sample_iid(model, n, RngStream(seed, 0))
        value = float(rank_sobol_indices(design.x[:, :1], design.y)[0])
        est = EstimateResult(value=value, n=n, evaluations=design.evaluations,
                             method="rank-sobol")
        if args.approx:
            comp = approx_sigma_from_sample(design.x[:, 0], design.y)
        else:
            comp = sigma_plugin(model, int(args.n_mc or 100_000), RngStream(seed, 1))
    lo, hi = confidence_interval(est, comp.sigma2, level)
    tag = " (approx)" if args.approx else ""
    print(f"estimate,{est.value:.10g}")
    print(f"sigma_hat{tag},{np.sqrt(comp.sigma2):.10g}")
    print(f"ci_{level:g},{lo:.10g},{hi:.10g}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        args = _merge_config(args)
        if args.command == "estimate":
            return cmd_estimate(args)
        if args.command == "study":
            return cmd_study(args)
        return cmd_ci(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except DegenerateDataError as e:
        print(f"error: degenerate data: {e}", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"error: I/O failure: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
