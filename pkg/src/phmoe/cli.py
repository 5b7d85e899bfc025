"""``phmoe`` command-line tool.

Subcommands: ``fit``, ``predict``, ``simulate``, ``gof`` and ``tail``.
Exit status is 0 on success, 2 on user errors (bad flags, files or data)
and 3 on numerical failures. Diagnostics go to stderr.
"""
import argparse
import csv
import json
import logging
import math
import os
import sys
import warnings

import numpy as np

from . import gof, io, phcore
from . import transforms as tf
from .emfit import FitConfig, FitError, default_transform, fit
from .errors import InfiniteMeanError, NumericalError, PhMoeError
from .inference import gating_inference, information_criteria
from .simulate import apply_censoring, parse_censoring, sample_responses, scenario_gamma_groups
from .data import Dataset

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3

SCENARIOS = ("gamma-groups",)


class UsageError(Exception):
    pass


def _err(msg):
    print(f"phmoe: {msg}", file=sys.stderr)


def _out_path(base, suffix):
    root, _ = os.path.splitext(base)
    return root + suffix


# ---------------------------------------------------------------- fit


def _fit_summary(res):
    return {"loglik": res.loglik, "dof": res.dof, "iterations": res.iterations,
            "converged": res.converged, "seed": res.seed}


def _design_groups(data, limit=20):
    """Distinct design rows with their member indices, at most ``limit``."""
    uniq, inverse = np.unique(data.X, axis=0, return_inverse=True)
    if uniq.shape[0] > limit:
        return None
    inverse = inverse.reshape(-1)
    return [(uniq[g], np.flatnonzero(inverse == g)) for g in range(uniq.shape[0])]


def _group_label(data, schema, idx):
    if not schema.columns:
        return "all"
    return ",".join(f"{c.name}={data.covariates[c.name][idx]}" for c in schema.columns)


def _mean_text(model, x):
    try:
        return f"{phcore.iph_mean(model.conditional(x)):.12g}"
    except InfiniteMeanError:
        return "inf"


def means_report(model, data, schema):
    """Observed against fitted conditional means per covariate group."""
    groups = _design_groups(data)
    lines = ["Means report", f"{'Group':<24}{'n':>8}{'Observed':>20}{'Fitted':>20}"]
    exact = data.is_exact
    if groups is None:
        lines.append("(more than 20 covariate groups; report skipped)")
        return "\n".join(lines)
    groups.sort(key=lambda g: _group_label(data, schema, g[1][0]))
    for x, members in groups:
        obs = members[exact[members]]
        w = data.weights[obs]
        observed = f"{float(w @ data.low[obs] / w.sum()):.12g}" if obs.size else "NA"
        label = _group_label(data, schema, members[0])
        lines.append(f"{label:<24}{members.size:>8}{observed:>20}{_mean_text(model, x):>20}")
    return "\n".join(lines)


def _summary_block(loglik, dof, n):
    ll, dof, aic, bic = information_criteria(loglik, dof, n)
    return "\n".join([
        f"{'Log Likelihood':<22}{ll:>16.2f}",
        f"{'Degrees of freedom':<22}{dof:>16d}",
        f"{'AIC':<22}{aic:>16.2f}",
        f"{'BIC':<22}{bic:>16.2f}",
    ])


def cmd_fit(args):
    data, schema = io.read_dataset(args.data, schema_spec=args.schema,
                                   standardize=args.standardize,
                                   response_scale=args.response_scale)
    transform = default_transform(args.transform, data, args.theta0, args.threshold)
    config = FitConfig(p=args.p, max_iterations=args.max_iter, loglik_tolerance=args.tol,
                       seed=args.seed)
    out = args.out
    try:
        res = fit(data, schema, transform, config)
    except FitError as exc:
        io.save_model(out, exc.model, {"loglik": exc.trace[-1] if len(exc.trace) else math.nan,
                                       "dof": exc.model.dof(), "iterations": exc.iteration,
                                       "converged": False, "seed": args.seed})
        _err(f"{exc}; last valid model written to {out}")
        return EXIT_NUMERIC
    model = res.model
    io.save_model(out, model, _fit_summary(res))
    trace_path = args.trace or _out_path(out, "_trace.csv")
    io.write_csv(trace_path, ["iteration", "loglik"], list(enumerate(res.trace.tolist())))
    table = gating_inference(res.stats.B, data.X, model.alpha, data.weights, schema.labels())
    coef_path = args.coef or _out_path(out, "_coef.csv")
    recs = table.rows()
    io.write_csv(coef_path, ["state", "term", "estimate", "std_error", "z_value", "p_value",
                             "signif"], [list(r.values()) for r in recs])
    print(f"PH-MoE fit: p={model.p}, transform={model.transform.family}, "
          f"iterations={res.iterations}, converged={str(res.converged).lower()}")
    if not model.transform.is_identity:
        extra = "" if model.transform.threshold is None else \
            f", threshold={model.transform.threshold:.6g}"
        print(f"theta={model.transform.theta:.6g}{extra}")
    if model.p == 1 and model.transform.is_identity:
        print(f"Exponential rate: {-model.T[0, 0]:.10g}")
    print(_summary_block(res.loglik, res.dof, data.n_effective))
    print()
    print(means_report(model, data, schema))
    if model.p > 1:
        print()
        print("Gating coefficients (standard errors)")
        print(table.format())
    if res.separated:
        _err("warning: gating coefficients reached the magnitude cap")
    if not res.converged:
        _err(f"warning: stopped after {res.iterations} iterations without meeting the tolerance")
    return EXIT_OK


# ---------------------------------------------------------------- predict


def _parse_quantiles(text):
    if not text:
        return []
    try:
        qs = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad quantile list {text!r}") from None
    if any(not 0 < q < 1 for q in qs):
        raise UsageError("quantiles must lie in (0, 1)")
    return qs


def cmd_predict(args):
    model, _ = io.load_model(args.model)
    qs = _parse_quantiles(args.quantiles)
    data, _ = io.read_dataset(args.data, schema=model.schema)
    uniq, inverse = np.unique(data.X, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    cache = []
    n_inf = 0
    for x in uniq:
        dist = model.conditional(x)
        try:
            m = phcore.iph_mean(dist)
        except InfiniteMeanError:
            m = math.inf
        cache.append([m] + [phcore.iph_quantile(dist, q) for q in qs])
    header = ["row", "mean"] + [f"q{q:g}" for q in qs]
    rows = []
    for i, g in enumerate(inverse):
        vals = cache[g]
        n_inf += math.isinf(vals[0])
        rows.append([i + 1] + [float(v) for v in vals])
    if args.out:
        io.write_csv(args.out, header, rows)
    else:
        wr = csv.writer(sys.stdout, lineterminator="\n")
        wr.writerow(header)
        for r in rows:
            wr.writerow([repr(v) if isinstance(v, float) else v for v in r])
    if n_inf:
        _err(f"warning: {n_inf} rows have an infinite conditional mean (written as inf)")
    return EXIT_OK


# ---------------------------------------------------------------- simulate


def cmd_simulate(args):
    rng = np.random.default_rng(args.seed)
    if args.scenario:
        if args.scenario not in SCENARIOS:
            raise UsageError(f"unknown scenario {args.scenario!r}; known: {', '.join(SCENARIOS)}")
        if args.n is not None and (args.n <= 0 or args.n % 4):
            raise UsageError("--n must be a positive multiple of 4 for gamma-groups")
        group_size = 500 if args.n is None else args.n // 4
        data, schema = scenario_gamma_groups(rng, group_size=group_size)
    elif args.model:
        model, _ = io.load_model(args.model)
        schema = model.schema
        if args.covariates:
            base, _ = io.read_dataset(args.covariates, schema=schema)
            idx = np.arange(len(base)) if args.n is None else rng.integers(0, len(base), args.n)
            X = base.X[idx]
            covs = {k: [v[i] for i in idx] for k, v in base.covariates.items()}
        else:
            if schema.columns:
                raise UsageError("model has covariates; pass --covariates FILE")
            n = 1000 if args.n is None else args.n
            X, covs = np.ones((n, 1)), {}
        y = sample_responses(model, X, rng)
        data = Dataset.exact(y, X, covariates=covs)
    else:
        raise UsageError("give --scenario or --model")
    if args.censor:
        try:
            scheme = parse_censoring(args.censor)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        data = apply_censoring(data, scheme, rng)
    if args.out:
        io.write_dataset(args.out, data, schema)
        stream = sys.stdout
    else:
        io.write_dataset(sys.stdout, data, schema)
        stream = sys.stderr
    exact = data.is_exact
    print(f"rows={len(data)} exact={int(exact.sum())} censored={int((~exact).sum())}",
          file=stream)
    if exact.any():
        y = data.low[exact]
        print(f"exact responses: mean={y.mean():.6g} median={np.median(y):.6g} "
              f"max={y.max():.6g}", file=stream)
    return EXIT_OK


# ---------------------------------------------------------------- gof


def cmd_gof(args):
    model, _ = io.load_model(args.model)
    data, _ = io.read_dataset(args.data, schema=model.schema)
    usable = data.is_exact | np.isinf(data.high)
    if not usable.any():
        raise UsageError("all rows are interval-censored; residuals need exact or "
                         "right-censored responses")
    os.makedirs(args.out_dir, exist_ok=True)
    path = lambda name: os.path.join(args.out_dir, f"{args.prefix}{name}.csv")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        sample = gof.residuals(model, data)
    for w in caught:
        _err(f"warning: {w.message}")
    io.write_csv(path("residuals"), ["r", "delta"], zip(sample.r.tolist(), sample.delta.tolist()))
    km = gof.kaplan_meier(sample, level=args.level)
    io.write_csv(path("km"), ["time", "survival", "lower", "upper", "variance"],
                 zip(*(a.tolist() for a in (km.times, km.survival, km.lower, km.upper,
                                            km.variance))))
    exact = data.is_exact
    if exact.any():
        pp = gof.pp_points(model, data)
        io.write_csv(path("pp"), ["empirical", "fitted"], pp.tolist())
    else:
        io.write_csv(path("pp"), ["empirical", "fitted"], [])
    y = data.low[exact]
    if y.size >= 3:
        ks, h = gof.hill_estimator(y, range(1, min(y.size - 2, args.hill_max_k) + 1))
        io.write_csv(path("hill"), ["k", "threshold", "hill", "tail_index"],
                     [(int(k), float(np.sort(y)[::-1][k]), float(v), float(v))
                      for k, v in zip(ks, h)])
    else:
        io.write_csv(path("hill"), ["k", "threshold", "hill", "tail_index"], [])
    if not sample.delta.any():
        raise UsageError("no uncensored rows; the uniformity check needs events")
    passed, stat, pval = gof.uniformity_check(sample, alpha=0.05)
    print(f"residuals: n={sample.r.size} events={int(sample.delta.sum())} "
          f"mean={sample.r.mean():.4f}")
    print(f"KS uniformity of exp(-r): D={stat:.5f} p={pval:.4g} -> "
          f"{'pass' if passed else 'fail'} at 5%")
    return EXIT_OK


# ---------------------------------------------------------------- tail


def _parse_row(text, schema):
    """``name=value,...`` covariates or a comma-separated design row."""
    text = text.strip()
    if "=" in text:
        raw = {}
        for item in text.split(","):
            k, _, v = item.partition("=")
            raw[k.strip()] = v.strip()
        return schema.build_design(raw)
    try:
        x = np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise UsageError(f"bad row spec {text!r}") from None
    if x.size == schema.d - 1:
        x = np.concatenate(([1.0], x))
    if x.size != schema.d:
        raise UsageError(f"design row needs {schema.d} entries (intercept first)")
    return x


def cmd_tail(args):
    model, _ = io.load_model(args.model)
    if args.pi:
        try:
            pi = np.array([float(v) for v in args.pi.split(",")])
        except ValueError:
            raise UsageError(f"bad initial vector {args.pi!r}") from None
        if pi.size != model.p or np.any(pi < 0) or abs(pi.sum() - 1) > 1e-9:
            raise UsageError(f"--pi must be a probability vector of length {model.p}")
    else:
        x = _parse_row(args.x, model.schema) if args.x else np.r_[1.0, np.zeros(model.schema.d - 1)]
        pi = model.pi(x)
    rep = phcore.tail_report(pi, model.T, model.transform, rate_tolerance=args.rate_tolerance)
    doc = rep.to_dict()
    doc["pi"] = pi.tolist()
    print(json.dumps(doc, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------- entry


def build_parser():
    ap = argparse.ArgumentParser(prog="phmoe", description="Phase-type mixture-of-experts "
                                 "regression for positive severities.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit a model by EM")
    f.add_argument("data")
    f.add_argument("--schema", help="name:num,name:cat[...] or a JSON file")
    f.add_argument("--p", type=int, default=1)
    f.add_argument("--transform", default="identity", help="|".join(tf.FAMILIES))
    f.add_argument("--theta0", type=float)
    f.add_argument("--threshold", type=float)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--max-iter", type=int, default=2000)
    f.add_argument("--tol", type=float, default=1e-8)
    f.add_argument("--standardize", action="store_true", help="center and scale numeric covariates")
    f.add_argument("--response-scale", type=float, default=1.0,
                   help="divide responses by this factor")
    f.add_argument("--out", default="model.json")
    f.add_argument("--trace")
    f.add_argument("--coef")
    f.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="conditional means and quantiles")
    p.add_argument("model")
    p.add_argument("data")
    p.add_argument("--quantiles", default="")
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    s = sub.add_parser("simulate", help="simulate a dataset")
    s.add_argument("--scenario")
    s.add_argument("--model")
    s.add_argument("--covariates", help="CSV whose covariate rows are resampled")
    s.add_argument("--n", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--censor", help="right@c, exp@rate or grid@width")
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    g = sub.add_parser("gof", help="goodness-of-fit tables")
    g.add_argument("model")
    g.add_argument("data")
    g.add_argument("--out-dir", default=".")
    g.add_argument("--prefix", default="gof_")
    g.add_argument("--level", type=float, default=0.95)
    g.add_argument("--hill-max-k", type=int, default=1000)
    g.set_defaults(func=cmd_gof)

    t = sub.add_parser("tail", help="tail behaviour for one covariate row")
    t.add_argument("model")
    t.add_argument("--x", help="name=value,... or a design row")
    t.add_argument("--pi", help="initial vector, overriding --x")
    t.add_argument("--rate-tolerance", type=float, default=0.0,
                   help="ignore transition rates below this multiple of the largest exit "
                        "intensity when tracing accessible states")
    t.set_defaults(func=cmd_tail)
    return ap


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (UsageError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        _err(str(exc))
        return EXIT_USAGE
    except BrokenPipeError:
        # reader closed stdout early (e.g. piped into head)
        sys.stderr.close()
        return EXIT_OK
    except NumericalError as exc:
        _err(f"numerical failure: {exc}")
        return EXIT_NUMERIC
    except (PhMoeError, ValueError) as exc:
        _err(str(exc))
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
