"""Command-line experiment runner.

Every subcommand is fully determined by its flags plus ``--seed``; re-running
with the same configuration yields byte-identical JSON/CSV payloads.  Flags
may be preloaded from a JSON file via ``--config`` (explicit flags win).

Exit codes: 0 ok, 1 configuration error, 2 capacity error, 3 selftest failure.
Configuration and capacity errors emit a machine-readable JSON object on
standard error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys

import numpy as np

from . import gibbs_exact, gibbs_mc, identities, symbolic
from .dilution import DilutionKind, DilutionModel, graph_to_json, sample_graph
from .errors import CapacityError, ParameterError
from .gibbs_mc import McParams
from .monomials import parse_monomial, render
from .parallel import default_workers
from .rng import RandomStream


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ParameterError(message)


def _add_common(p, mc_opts=False):
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--threads", type=int, default=None, help="worker processes (default: DFL_THREADS or all cores)")
    p.add_argument("--out-json", default=None, help="write the JSON report here instead of stdout")
    p.add_argument("--out-csv", default=None, help="also write a CSV table here")
    if mc_opts:
        p.add_argument("--replicas", type=int, default=5)
        p.add_argument("--burn", type=int, default=1000)
        p.add_argument("--measure", type=int, default=10000)
        p.add_argument("--thin", type=int, default=10)


def _model_args(p):
    p.add_argument("--model", choices=["bernoulli", "poisson"], required=True)
    p.add_argument("--alpha", type=float, required=True)


def build_parser() -> _Parser:
    parser = _Parser(prog="dilferro", description=__doc__)
    parser.add_argument("--config", default=None, help="JSON file with default flag values")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample-graph", help="dump one quenched graph as JSON")
    _model_args(p)
    p.add_argument("--n", type=int, required=True)
    _add_common(p)

    p = sub.add_parser("exact", help="exact observables on one sampled graph")
    _model_args(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--monomials", default="m1^2,q12^2", help="comma-separated monomials")
    _add_common(p)

    p = sub.add_parser("mc", help="Monte Carlo observables on one sampled graph")
    _model_args(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--monomials", default="m1^2,q12^2")
    _add_common(p, mc_opts=True)

    p = sub.add_parser("identities", help="quenched identity residual report")
    _model_args(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--engine", choices=["exact", "mc"], default="exact")
    p.add_argument("--disorder", type=int, default=100)
    _add_common(p, mc_opts=True)

    p = sub.add_parser("scan", help="sweep residuals, the variance bound, or the f_G integral")
    p.add_argument("--quantity", choices=["identities", "var-bound", "fg"], required=True)
    _model_args(p)
    p.add_argument("--n", required=True, help="comma-separated sizes, e.g. 6,8,12")
    p.add_argument("--beta", type=float, default=None, help="single beta (identities scan)")
    p.add_argument("--beta-range", default=None, help="grid as a:b:k, e.g. 0.1:1.0:64")
    p.add_argument("--disorder", type=int, default=200)
    p.add_argument("--g", choices=["m2", "q12^2"], default="m2", help="trial monomial for --quantity fg")
    _add_common(p)

    p = sub.add_parser("compare-dilutions", help="free-energy trend at matched edge density")
    p.add_argument("--edge-density", type=float, required=True)
    p.add_argument("--n-list", required=True, help="comma-separated sizes")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--disorder", type=int, default=2000)
    _add_common(p)

    p = sub.add_parser("gauge-check", help="cavity gauge identity at t = 1")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--disorder", type=int, default=10000)
    _add_common(p)

    p = sub.add_parser("symbolic", help="derive identity generators and compare methods")
    p.add_argument("--g", default="m2", help="trial monomial: m2, q12^2, or any monomial text")
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--s", type=int, default=None, help="replica count (default: max label of G)")
    p.add_argument("--method", choices=["streaming", "self-averaging", "both"], default="both")
    p.add_argument("--compare", action="store_true", help="report per-order method agreement")
    _add_common(p)

    p = sub.add_parser("selftest", help="run the desk-scale invariant suite")
    _add_common(p)
    return parser


# -- output helpers ------------------------------------------------------------------


def _emit_json(payload, args) -> None:
    text = json.dumps(payload, indent=2, sort_keys=False)
    if args.out_json:
        with open(args.out_json, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _write_csv(path: str, rows: list[dict]) -> None:
    if not rows:
        return
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def _report_rows(report) -> list[dict]:
    rows = []
    for name, est in report.residuals.items():
        rows.append(
            {
                "model": report.model.kind.value,
                "N": report.n_sites,
                "alpha": report.model.alpha,
                "beta": report.beta,
                "identity": name,
                "value": est.value,
                "stderr": "" if math.isnan(est.stderr) else est.stderr,
                "n_disorder": report.n_disorder,
                "engine": report.engine,
                "seed": report.seed,
            }
        )
    return rows


def _parse_sizes(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ParameterError(f"bad size list {text!r}") from exc


def _parse_beta_range(text: str) -> np.ndarray:
    try:
        lo, hi, k = text.split(":")
        return np.linspace(float(lo), float(hi), int(k))
    except ValueError as exc:
        raise ParameterError(f"bad beta range {text!r} (want a:b:k)") from exc


def _mc_params(args) -> McParams:
    return McParams(
        n_replicas=args.replicas,
        burn_in_sweeps=args.burn,
        measure_sweeps=args.measure,
        thin=args.thin,
    )


# -- subcommand bodies -----------------------------------------------------------------


def _cmd_sample_graph(args) -> int:
    model = DilutionModel(DilutionKind(args.model), args.alpha)
    graph = sample_graph(model, args.n, RandomStream(args.seed, 0), seed=args.seed)
    text = graph_to_json(graph)
    if args.out_json:
        with open(args.out_json, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def _cmd_exact(args) -> int:
    model = DilutionModel(DilutionKind(args.model), args.alpha)
    graph = sample_graph(model, args.n, RandomStream(args.seed, 0), seed=args.seed)
    monos = [parse_monomial(t) for t in args.monomials.split(",") if t.strip()]
    state = gibbs_exact.thermal_state(graph, args.beta)
    stats = gibbs_exact.internal_energy_stats(graph, args.beta)
    omega = gibbs_exact.omega_table(graph, args.beta)
    values = {
        render(mo): gibbs_exact.monomial_expectation(graph, args.beta, mo, omega)
        for mo in monos
    }
    _emit_json(
        {
            "schema_version": 1,
            "model": args.model,
            "alpha": args.alpha,
            "n_sites": args.n,
            "beta": args.beta,
            "seed": args.seed,
            "n_edges": graph.n_edges,
            "log_z": state.log_z,
            "theta": state.theta,
            "mean_h": stats["mean_h"],
            "thermal_variance_h": stats["thermal_variance_h"],
            "monomials": values,
        },
        args,
    )
    return 0


def _cmd_mc(args) -> int:
    model = DilutionModel(DilutionKind(args.model), args.alpha)
    graph = sample_graph(model, args.n, RandomStream(args.seed, 0), seed=args.seed)
    monos = [parse_monomial(t) for t in args.monomials.split(",") if t.strip()]
    ests = gibbs_mc.estimate_monomials(
        graph, args.beta, monos, _mc_params(args), RandomStream(args.seed, 1)
    )
    _emit_json(
        {
            "schema_version": 1,
            "model": args.model,
            "alpha": args.alpha,
            "n_sites": args.n,
            "beta": args.beta,
            "seed": args.seed,
            "params": {
                "n_replicas": args.replicas,
                "burn_in_sweeps": args.burn,
                "measure_sweeps": args.measure,
                "thin": args.thin,
            },
            "monomials": {
                render(mo): est for mo, est in zip(monos, ests)
            },
        },
        args,
    )
    return 0


def _cmd_identities(args) -> int:
    model = DilutionModel(DilutionKind(args.model), args.alpha)
    report = identities.residuals(
        model,
        args.n,
        args.beta,
        engine=args.engine,
        n_disorder=args.disorder,
        seed=args.seed,
        mc_params=_mc_params(args) if args.engine == "mc" else None,
        n_jobs=args.threads or default_workers(),
    )
    _emit_json(report.to_json(), args)
    if args.out_csv:
        _write_csv(args.out_csv, _report_rows(report))
    return 0


def _cmd_scan(args) -> int:
    model = DilutionModel(DilutionKind(args.model), args.alpha)
    sizes = _parse_sizes(args.n)
    n_jobs = args.threads or default_workers()
    rows: list[dict] = []
    payload: list[dict] = []
    if args.quantity == "identities":
        if args.beta is None:
            raise ParameterError("identities scan needs --beta")
        for n in sizes:
            report = identities.residuals(
                model, n, args.beta, engine="exact",
                n_disorder=args.disorder, seed=args.seed, n_jobs=n_jobs,
            )
            payload.append(report.to_json())
            rows.extend(_report_rows(report))
    elif args.quantity == "var-bound":
        if args.beta_range is None:
            raise ParameterError("var-bound scan needs --beta-range a:b:k")
        grid = _parse_beta_range(args.beta_range)
        for n in sizes:
            res = identities.variance_bound_check(
                model, n, (float(grid[0]), float(grid[-1])), n_grid=len(grid),
                n_disorder=args.disorder, seed=args.seed, n_jobs=n_jobs,
            )
            res["n_sites"] = n
            payload.append(res)
            rows.append(
                {
                    "model": args.model,
                    "N": n,
                    "alpha": args.alpha,
                    "beta": f"{grid[0]}:{grid[-1]}",
                    "identity": "var_bound",
                    "value": res["integral"],
                    "stderr": res["stderr"],
                    "n_disorder": args.disorder,
                    "engine": "exact",
                    "seed": args.seed,
                }
            )
    else:  # fg
        if args.beta_range is None:
            raise ParameterError("fg scan needs --beta-range a:b:k")
        grid = _parse_beta_range(args.beta_range)
        name = "fG_m2" if args.g == "m2" else "fG_q2"
        for n in sizes:
            prof = identities.f_G_profile(
                model, n, args.g, grid, engine="exact",
                n_disorder=args.disorder, seed=args.seed, n_jobs=n_jobs,
            )
            payload.append(prof.to_json())
            rows.append(
                {
                    "model": args.model,
                    "N": n,
                    "alpha": args.alpha,
                    "beta": f"{grid[0]}:{grid[-1]}",
                    "identity": name,
                    "value": prof.integral,
                    "stderr": prof.integral_stderr,
                    "n_disorder": args.disorder,
                    "engine": "exact",
                    "seed": args.seed,
                }
            )
    _emit_json({"schema_version": 1, "quantity": args.quantity, "results": payload}, args)
    if args.out_csv:
        _write_csv(args.out_csv, rows)
    return 0


def _cmd_compare_dilutions(args) -> int:
    results = identities.free_energy_compare(
        args.edge_density,
        _parse_sizes(args.n_list),
        args.beta,
        n_disorder=args.disorder,
        seed=args.seed,
        n_jobs=args.threads or default_workers(),
    )
    payload = []
    rows = []
    for res in results:
        payload.append(
            {
                "n_sites": res["n_sites"],
                "alpha_bernoulli": res["alpha_bernoulli"],
                "alpha_poisson": res["alpha_poisson"],
                "A_bernoulli": res["A_bernoulli"].to_json(),
                "A_poisson": res["A_poisson"].to_json(),
                "diff": res["diff"],
                "stderr": res["stderr"],
                "n_disorder": res["n_disorder"],
            }
        )
        rows.append(
            {
                "model": "both",
                "N": res["n_sites"],
                "alpha": args.edge_density,
                "beta": args.beta,
                "identity": "free_energy",
                "value": res["diff"],
                "stderr": res["stderr"],
                "n_disorder": res["n_disorder"],
                "engine": "exact",
                "seed": args.seed,
            }
        )
    _emit_json({"schema_version": 1, "edge_density": args.edge_density, "results": payload}, args)
    if args.out_csv:
        _write_csv(args.out_csv, rows)
    return 0


def _cmd_gauge_check(args) -> int:
    res = identities.cavity_gauge_check(
        args.alpha, args.n, args.beta,
        n_disorder=args.disorder, seed=args.seed,
        n_jobs=args.threads or default_workers(),
    )
    res.update(
        {"schema_version": 1, "alpha": args.alpha, "n_sites": args.n, "beta": args.beta, "seed": args.seed}
    )
    _emit_json(res, args)
    return 0


def _cmd_symbolic(args) -> int:
    g_text = {"m2": "m1^2", "m^2": "m1^2", "q2": "q12^2"}.get(args.g, args.g)
    G = parse_monomial(g_text)
    from .monomials import max_replica

    s = args.s if args.s is not None else max(1, max_replica(G))
    payload: dict = {"schema_version": 1, "g": render(G), "s": s, "order": args.order}
    lines: list[str] = []
    if args.method in ("streaming", "both"):
        stream = symbolic.gauge_complete(symbolic.streaming_derivative(G, s, args.order))
        lines += ["# streaming route (gauge completed)", symbolic.combination_text(stream), ""]
        payload["streaming"] = stream.to_json()
        payload["streaming_identities"] = [
            symbolic.identity_text(ie) for ie in symbolic.extract_identities(stream)
        ]
    if args.method in ("self-averaging", "both"):
        fg = symbolic.self_averaging_fG(G, s, max(args.order - 1, 0))
        lines += ["# self-averaging route (f_G)", symbolic.combination_text(fg), ""]
        payload["fg"] = fg.to_json()
        payload["fg_identities"] = [
            symbolic.identity_text(ie) for ie in symbolic.extract_identities(fg)
        ]
    if args.compare:
        cmpres = symbolic.compare_methods(G, s, args.order)
        lines += ["# identities"]
        lines += [symbolic.identity_text(ie) for ie in cmpres.streaming_identities]
        lines += [f"methods agree: {str(cmpres.all_equal).lower()}"]
        payload["compare"] = {
            "all_equal": cmpres.all_equal,
            "orders": [
                {
                    "streaming_order": o.streaming_order,
                    "fg_order": o.fg_order,
                    "equal": o.equal,
                    "proportional": o.proportional,
                    "ratio": None if o.ratio is None else str(o.ratio),
                }
                for o in cmpres.orders
            ],
        }
    print("\n".join(lines))
    if args.out_json:
        with open(args.out_json, "w") as fh:
            fh.write(json.dumps(payload, indent=2) + "\n")
    return 0


def _cmd_selftest(args) -> int:
    from .selftest import run_selftest

    return 0 if run_selftest(verbose=True) else 3


_COMMANDS = {
    "sample-graph": _cmd_sample_graph,
    "exact": _cmd_exact,
    "mc": _cmd_mc,
    "identities": _cmd_identities,
    "scan": _cmd_scan,
    "compare-dilutions": _cmd_compare_dilutions,
    "gauge-check": _cmd_gauge_check,
    "symbolic": _cmd_symbolic,
    "selftest": _cmd_selftest,
}


def _error_json(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": {"type": kind, "message": message}}) + "\n")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        pre = _Parser(add_help=False)
        pre.add_argument("--config", default=None)
        known, _ = pre.parse_known_args(argv)
        if known.config:
            with open(known.config) as fh:
                defaults = json.load(fh)
            if not isinstance(defaults, dict):
                raise ParameterError("--config must contain a JSON object")
            parser.set_defaults(**defaults)
            for action in parser._subparsers._group_actions:  # noqa: SLF001
                for sp in action.choices.values():
                    sp.set_defaults(**defaults)
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except ParameterError as exc:
        _error_json("config", str(exc))
        return 1
    except CapacityError as exc:
        _error_json("capacity", str(exc))
        return 2
    except FileNotFoundError as exc:
        _error_json("config", str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
