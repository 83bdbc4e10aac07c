"""Command-line entry point: ``covar-evt simulate|estimate|fit-tdf|forecast|backtest|curves``.

Every command accepts ``--config FILE`` with flat ``key=value`` lines (keys
are the long flag names, dashes or underscores); explicit flags win.
Artifacts go to ``--out DIR`` and each embeds the resolved configuration.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .backtest import MethodForecasts, backtest_report
from .core import CovarConfig, RiskLevel, estimate_covar
from .empirical import LossPairSample
from .exceptions import CovarError
from .garch import fit_ar_garch, realized_residuals, rolling_forecast
from .generative import GenerativeModel
from .io import inner_join, read_forecast_csv, read_series, write_csv, write_json
from .mestimator import DEFAULT_M, TestFunctionSet, default_g, fit_tdf
from .simulation import DEFAULT_PARAMS, VARIANTS, McStudyConfig, mc_study
from .tdf import Family, TdfModel, r_one_eta_curve
from .univariate import (BootstrapConfig, bootstrap_k_selection, hill, hill_curve, var_sensitivity,
                         weissman_quantile)


def read_config_file(path) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CovarError(f"{path}:{lineno}: expected key=value, got {line!r}")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file supplying defaults for any flag")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", default=".", help="output directory")


def _add_levels(p: argparse.ArgumentParser) -> None:
    p.add_argument("--p1", type=float, default=0.05, help="exceedance probability of the institution")
    p.add_argument("--p2", type=float, default=0.05, help="exceedance probability for CoVaR")


def _add_pair_inputs(p: argparse.ArgumentParser) -> None:
    p.add_argument("--institution", required=True, help="(date,value) CSV for the institution")
    p.add_argument("--system", required=True, help="(date,value) CSV for the system")
    p.add_argument("--mode", choices=("prices", "losses"), default="prices")


def _add_estimator(p: argparse.ArgumentParser) -> None:
    p.add_argument("--family", default="logistic", help="tail dependence family")
    p.add_argument("--m", type=int, help="number of tail ranks for M-estimation")
    p.add_argument("--k1", type=int, help="Hill sample fraction (default: bootstrap)")
    p.add_argument("--k2", type=int, help="Weissman sample fraction (default: k1)")
    p.add_argument("--g", help="test functions, e.g. '1;x' (default per family)")
    p.add_argument("--init", type=_floats, help="comma-separated starting parameters")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="covar-evt", description="Extreme-value CoVaR estimation for paired loss series.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte Carlo study of the estimator")
    _add_common(p)
    p.add_argument("--family", default="logistic")
    p.add_argument("--params", type=_floats, help="model parameters (default per family)")
    p.add_argument("--n", type=int)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--p", type=float, default=0.05)
    p.add_argument("--m", type=int)
    p.add_argument("--g")
    p.add_argument("--variants", default=",".join(VARIANTS))

    p = sub.add_parser("estimate", help="static CoVaR estimate from two series")
    _add_common(p)
    _add_pair_inputs(p)
    _add_levels(p)
    _add_estimator(p)
    p.add_argument("--filter", choices=("none", "garch"), default="none",
                   help="estimate on AR-GARCH residuals and emit an in-sample table")

    p = sub.add_parser("fit-tdf", help="M-estimate tail dependence parameters")
    _add_common(p)
    _add_pair_inputs(p)
    p.add_argument("--family", default="logistic")
    p.add_argument("--m", type=int)
    p.add_argument("--g")
    p.add_argument("--init", type=_floats)

    p = sub.add_parser("forecast", help="rolling dynamic VaR/CoVaR forecasts")
    _add_common(p)
    _add_pair_inputs(p)
    _add_levels(p)
    _add_estimator(p)
    p.add_argument("--window", type=int, default=3000)
    p.add_argument("--refit-stride", type=int, default=50)

    p = sub.add_parser("backtest", help="coverage tests and comparative backtests")
    _add_common(p)
    _add_levels(p)
    p.add_argument("--input", action="append", default=[], metavar="INST:METHOD=PATH",
                   help="forecast table for one institution and method (repeatable)")
    p.add_argument("--level", type=float, default=0.10, help="comparative test level")

    p = sub.add_parser("curves", help="plot data: R(1,eta), VaR sensitivity, Hill plot")
    _add_common(p)
    p.add_argument("--family", default="logistic")
    p.add_argument("--params", type=_floats)
    p.add_argument("--losses", help="(date,value) CSV of losses for the VaR and Hill curves")
    p.add_argument("--mode", choices=("prices", "losses"), default="losses")
    p.add_argument("--p", type=float, default=0.05)
    p.add_argument("--k1", type=int)
    return parser


def _config_path(argv: list[str]) -> str | None:
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def parse_args(argv=None) -> argparse.Namespace:
    """Parse flags, splicing config-file entries in ahead of explicit flags
    so that explicit flags override them."""
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    path = _config_path(argv)
    command = next((t for t in argv if t in COMMANDS), None)
    if path is None or command is None:
        return parser.parse_args(argv)
    cfg = read_config_file(path)
    sub = parser._subparsers._group_actions[0].choices[command]
    known = {a.dest: a for a in sub._actions if a.option_strings}
    unknown = set(cfg) - set(known)
    if unknown:
        raise CovarError(f"unknown config keys for {command}: {sorted(unknown)}")
    flags = {s: a.dest for a in sub._actions for s in a.option_strings}
    explicit = {flags[t.split("=", 1)[0]] for t in argv if t.split("=", 1)[0] in flags}
    extra = []
    for k, v in cfg.items():
        if k in explicit or k == "config":
            continue
        flag = known[k].option_strings[-1]
        items = v.split() if isinstance(known[k], argparse._AppendAction) else [v]
        for item in items:
            extra += [flag, item]
    at = argv.index(command) + 1
    return parser.parse_args(argv[:at] + extra + argv[at:])


def _resolved(args) -> dict:
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(args).items()}


class _Outputs:
    """Tracks written artifacts so they can be removed after a failure."""

    def __init__(self, out: str):
        self.dir = Path(out)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.written: list[Path] = []

    def path(self, name: str) -> Path:
        p = self.dir / name
        self.written.append(p)
        return p

    def cleanup(self) -> None:
        for p in self.written:
            p.unlink(missing_ok=True)


def _load_pair(args):
    a = read_series(args.institution, args.mode)
    b = read_series(args.system, args.mode)
    return inner_join(a, b)


def _covar_config(args) -> CovarConfig:
    return CovarConfig(m=args.m, k1=args.k1, k2=args.k2, g=args.g, init=args.init,
                       bootstrap=BootstrapConfig(seed=args.seed), fit_seed=args.seed)


def run_simulate(args, out: _Outputs) -> str:
    fam = Family.parse(args.family)
    params = args.params or DEFAULT_PARAMS[fam]
    model = GenerativeModel(fam, params)
    variants = tuple(v.strip() for v in args.variants.split(",") if v.strip())
    cfg = McStudyConfig.default(fam, model=model, reps=args.reps, p=args.p, m=args.m,
                                g=TestFunctionSet.parse(args.g) if args.g else None,
                                variants=variants, master_seed=args.seed,
                                workers=max(1, args.threads), **({"n": args.n} if args.n else {}))
    res = mc_study(cfg)
    conf = {**_resolved(args), "params": list(params), "n": cfg.n, "m": cfg.m, "g": str(cfg.g)}
    rows = [("true", "covar", res.truth.covar)]
    for v, stats in res.summary().items():
        rows += [(v, k, val) for k, val in stats.items()]
    rows.append(("all", "failures", res.failure_count))
    write_csv(out.path("simulation_summary.csv"), ["variant", "statistic", fam.value], rows, conf)
    dens = []
    for rec in res.records:
        for q in ("gamma_hat", "eta_star_hat", "var_hat", *(f"covar_{v}" for v in variants)):
            dens.append((rec["replication"], q, rec[q]))
    write_csv(out.path("simulation_density.csv"), ["replication", "quantity", "value"], dens, conf)
    lines = [f"{fam.value} {params} n={cfg.n} reps={cfg.reps}: true CoVaR {res.truth.covar:.4f}"]
    for v, s in res.summary().items():
        lines.append(f"  {v:14s} mean {s['mean']:.4f}  median {s['median']:.4f}  sd {s['sd']:.4f}")
    lines.append(f"  failures {res.failure_count}")
    return "\n".join(lines)


def run_estimate(args, out: _Outputs) -> str:
    data = _load_pair(args)
    levels = RiskLevel(args.p1, args.p2)
    conf = {**_resolved(args), "dropped_institution": data.dropped_x, "dropped_system": data.dropped_y}
    payload = {}
    xs, ys = data.x, data.y
    if args.filter == "garch":
        fit_i, fit_s = fit_ar_garch(xs), fit_ar_garch(ys)
        xs, ys = realized_residuals(data.x, fit_i), realized_residuals(data.y, fit_s)
        payload["garch"] = {
            "institution": {k: v for k, v in vars(fit_i).items() if np.isscalar(v)},
            "system": {k: v for k, v in vars(fit_s).items() if np.isscalar(v)},
        }
    sample = LossPairSample(xs, ys)
    est = estimate_covar(sample, args.family, levels, _covar_config(args))
    payload["estimate"] = est.as_record()
    if args.filter == "garch":
        k = est.k1
        var_z = weissman_quantile(xs, k, hill(xs, k), levels.p1)
        rows = [(d, fit_i.cond_mean[t] + fit_i.cond_vol[t] * var_z,
                 fit_s.cond_mean[t] + fit_s.cond_vol[t] * est.value, data.x[t], data.y[t])
                for t, d in enumerate(data.dates)]
        write_csv(out.path("in_sample.csv"),
                  ["date", "var_i", "covar_s_given_i", "realized_x_i", "realized_x_s"], rows, conf)
        payload["residual_var_institution"] = var_z
    write_json(out.path("estimate.json"), payload, conf)
    return (f"CoVaR({levels.p1}, {levels.p2}) = {est.value:.6g}  eta*={est.eta_star_hat:.6g}  "
            f"gamma={est.gamma_hat:.4f}  VaR_Y={est.var_component:.6g}  k1={est.k1} k2={est.k2} m={est.m}")


def run_fit_tdf(args, out: _Outputs) -> str:
    data = _load_pair(args)
    fam = Family.parse(args.family)
    sample = LossPairSample(data.x, data.y)
    m = args.m or min(DEFAULT_M[fam], sample.n)
    g = TestFunctionSet.parse(args.g) if args.g else default_g(fam)
    fit = fit_tdf(sample, m, fam, g, init=args.init, seed=args.seed)
    write_json(out.path("tdf_fit.json"), {"fit": fit.as_dict()}, _resolved(args))
    return f"{fam.value} {dict(zip(fam.param_names, fit.theta_hat))} objective={fit.objective_value:.3g}"


def run_forecast(args, out: _Outputs) -> str:
    data = _load_pair(args)
    levels = RiskLevel(args.p1, args.p2)
    rows = rolling_forecast(data.x, data.y, args.window, args.refit_stride, levels,
                            _covar_config(args), family=args.family, dates=data.dates)
    conf = {**_resolved(args), "dropped_institution": data.dropped_x, "dropped_system": data.dropped_y}
    header = ["date", "var_i", "covar_s_given_i", "realized_x_i", "realized_x_s", "refit_id", "valid", "error"]
    write_csv(out.path("forecast.csv"), header,
              [(r.date, r.var_i, r.covar_s_given_i, r.realized_x_i, r.realized_x_s,
                r.refit_id, r.valid, r.error) for r in rows], conf)
    bad = sum(not r.valid for r in rows)
    return f"{len(rows)} forecast days, {bad} invalid, {rows[-1].refit_id + 1 if rows else 0} refits"


def _parse_input_spec(spec: str) -> tuple[str, str, str]:
    try:
        key, path = spec.split("=", 1)
        inst, meth = key.split(":", 1)
    except ValueError:
        raise CovarError(f"--input expects INST:METHOD=PATH, got {spec!r}") from None
    return inst, meth, path


def run_backtest(args, out: _Outputs) -> str:
    if not args.input:
        raise CovarError("backtest needs at least one --input INST:METHOD=PATH")
    forecasts: dict[str, dict[str, MethodForecasts]] = {}
    for spec in args.input:
        inst, meth, path = _parse_input_spec(spec)
        t = read_forecast_csv(path)
        forecasts.setdefault(inst, {})[meth] = MethodForecasts(
            t["var_i"], t["covar_s_given_i"], t["realized_x_i"], t["realized_x_s"], t["valid"], t["date"])
    report = backtest_report(forecasts, args.p1, args.p2, args.level)
    write_json(out.path("backtest.json"), report, _resolved(args))
    rows = []
    for inst, r in report["institutions"].items():
        for meth, c in r["methods"].items():
            rows.append((inst, meth, c["E_n"], c["e_n"], c["var_p_value"], c["E_n_b"], c["e_n_b"],
                         c["covar_p_value"] if c["covar_p_value"] is not None else float("nan"),
                         c["average_score"]))
    write_csv(out.path("backtest_table.csv"),
              ["institution", "method", "E_n", "e_n", "var_p_value", "E_n_b", "e_n_b",
               "covar_p_value", "average_score"], rows, _resolved(args))
    return "\n".join(f"{i:10s} {m:14s} E_n={a} e_n={b:.2f} p={c:.4f}  E_n^b={d} e_n^b={e:.2f} p={f:.4f} score={g:.4f}"
                     for i, m, a, b, c, d, e, f, g in rows)


def run_curves(args, out: _Outputs) -> str:
    fam = Family.parse(args.family)
    params = args.params or DEFAULT_PARAMS[fam]
    conf = {**_resolved(args), "params": list(params)}
    if fam is Family.STUDENT_T and params[1] <= 0:
        raise CovarError("t tail dependence needs rho > 0")
    model = TdfModel(fam, params)
    grid = np.linspace(0.0, 1.0, 101)
    write_csv(out.path("r_curve.csv"), ["eta", "R_1_eta"], r_one_eta_curve(model, grid), conf)
    msg = [f"R(1, eta) for {fam.value} {params}: 101 points"]
    if args.losses:
        ys = read_series(args.losses, args.mode).values
        n = ys.size
        k1 = args.k1 or bootstrap_k_selection(ys, BootstrapConfig(seed=args.seed)).k
        gamma = hill(ys, k1)
        ks = range(max(1, n // 100), n // 2)
        write_csv(out.path("var_sensitivity.csv"), ["k2", "var"], var_sensitivity(ys, gamma, args.p, ks),
                  {**conf, "k1": k1, "gamma": gamma})
        write_csv(out.path("hill.csv"), ["k", "gamma"], hill_curve(ys, range(2, n // 2)), conf)
        msg.append(f"VaR sensitivity and Hill curves for {n} losses (k1={k1}, gamma={gamma:.4f})")
    return "\n".join(msg)


COMMANDS = {
    "simulate": run_simulate,
    "estimate": run_estimate,
    "fit-tdf": run_fit_tdf,
    "forecast": run_forecast,
    "backtest": run_backtest,
    "curves": run_curves,
}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except CovarError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    out = _Outputs(args.out)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            print(COMMANDS[args.command](args, out))
    except (CovarError, ValueError, ArithmeticError, OSError) as exc:
        out.cleanup()
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "command": args.command}),
              file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
