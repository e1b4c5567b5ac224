"""Command-line entry point: ``expflow <command> [options]``.

Exit codes: 0 when every verdict passes, 2 when a verdict fails, 1 for
usage or configuration errors.
"""

import argparse
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .config import ConfigError, LoadedConfig, load_config, resolve
from .core import DomainEscape
from .entropy import default_tolerance, estimate_e_star, estimate_entropy_compact
from .expansivity import SearchBudget, falsify, normalize_notion, witness_plot_rows
from .fixtures import list_fixtures, make_fixture, normalize_fixture_id
from .periodic import growth_rate, orbit_census
from .scales import ScaleFn, constant, jim_scale
from .serialization import dump, dumps, write_columns
from .separation import separation_report
from .suites import SUITES, default_compact, default_deltas, default_dt, run_suite

EXIT_OK, EXIT_USAGE, EXIT_VERDICT = 0, 1, 2
OUTPUT_ENV = "EXPFLOW_OUTPUT_DIR"


class UsageError(Exception):
    pass


# -- helpers ------------------------------------------------------------------
def _out_dir(args, cfg):
    out = resolve(args, cfg, "out") or os.environ.get(OUTPUT_ENV) or "expflow_out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _parse_params(pairs):
    params = {}
    for item in pairs or []:
        if "=" not in item:
            raise UsageError(f"--param expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        params[key.strip()] = yaml.safe_load(raw)
    return params


def _fixture(args, cfg, default=None):
    name = resolve(args, cfg, "fixture", default)
    if name is None:
        raise UsageError("no fixture given (use --fixture or set 'fixture' in the config)")
    params = dict(cfg.values.get("fixture_params") or {})
    params.update(_parse_params(getattr(args, "param", None)))
    try:
        flow = make_fixture(name, **params)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    return normalize_fixture_id(name), params, flow


def _floats(text):
    if text is None:
        return None
    if isinstance(text, list):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"expected a comma-separated list of numbers, got {text!r}") from exc


def _t_grid(args, cfg, flow):
    grid = _floats(resolve(args, cfg, "t_grid"))
    if grid:
        return grid
    t_max = float(resolve(args, cfg, "t_max", 12))
    if t_max < 2:
        raise UsageError("t_max must be at least 2 for a tail rate")
    return [float(t) for t in np.arange(1, int(t_max) + 1)]


def _delta(spec, flow, eps=1.0):
    if isinstance(spec, (int, float)):
        return constant(float(spec))
    text = str(spec).strip()
    if text == "jim":
        return jim_scale(getattr(flow, "v", (1.0, 0.0)), eps)
    if text.startswith("vanishing:"):
        c = float(text.split(":", 1)[1])
        sing = [np.asarray(s, dtype=float) for s in flow.singularities]
        if not sing:
            raise UsageError("vanishing scale needs declared singularities")

        def func(points):
            pts = np.asarray(points, dtype=float)
            return c * np.min([np.linalg.norm(pts - s, axis=-1) for s in sing], axis=0)
        return ScaleFn(func, "vanishing_on_singularities", f"vanishing({c:g})")
    try:
        return constant(float(text))
    except ValueError as exc:
        raise UsageError(f"unknown scale {spec!r}; use a number, 'jim' or 'vanishing:c'") from exc


def _run_header(command, fixture, params, seed, extra=None):
    head = {"command": command, "fixture": fixture, "fixture_params": params, "seed": seed,
            "version": __version__}
    head.update(extra or {})
    return head


def _say(text):
    print(text)


# -- commands -----------------------------------------------------------------
def cmd_fixtures(args, cfg):
    catalog = list_fixtures()
    if args.action == "list":
        if args.json:
            sys.stdout.write(dumps({k: v.__dict__ for k, v in catalog.items()}))
        else:
            for name, info in catalog.items():
                _say(f"{name:20s} {info.description}")
        return EXIT_OK
    name = normalize_fixture_id(args.name or "")
    if name not in catalog:
        raise UsageError(f"unknown fixture {args.name!r}; known: {sorted(catalog)}")
    info = catalog[name]
    if args.json:
        sys.stdout.write(dumps(info.__dict__))
    else:
        _say(f"{info.name}: {info.description}")
        for key, desc in info.parameters.items():
            _say(f"  {key}: {desc}")
    return EXIT_OK


def cmd_estimate(args, cfg):
    fixture, params, flow = _fixture(args, cfg)
    seed = int(resolve(args, cfg, "seed", 0))
    jobs = int(resolve(args, cfg, "jobs", 1))
    mode = resolve(args, cfg, "mode", "e-star").replace("_", "-")
    if mode not in ("classical", "e-star", "e-star-spanning", "both"):
        raise UsageError(f"unknown mode {mode!r}")
    t_grid = _t_grid(args, cfg, flow)
    dt = float(resolve(args, cfg, "dt", default_dt(flow)))
    deltas = _floats(resolve(args, cfg, "deltas")) or list(default_deltas(flow))
    K = default_compact(flow, int(resolve(args, cfg, "depth", 15)), seed)
    out = _out_dir(args, cfg)
    stem = f"estimate_{fixture.replace(':', '_')}_{mode}"
    reports = {}
    if mode in ("classical", "both"):
        reports["classical"] = estimate_entropy_compact(flow, K, deltas, t_grid, dt, seed, jobs)
    if mode in ("e-star", "both"):
        reports["e_star"] = estimate_e_star(flow, [K], deltas, t_grid, dt, "separating", seed, jobs)
    if mode == "e-star-spanning":
        reports["e_star_spanning"] = estimate_e_star(flow, [K], deltas, t_grid, dt, "spanning", seed, jobs)
    doc = {"run": _run_header("estimate", fixture, params, seed, {"mode": mode, "K": K.region_descriptor}),
           "reports": {k: r.to_dict() for k, r in reports.items()}}
    code = EXIT_OK
    if mode == "both":
        a, b = reports["e_star"].estimate, reports["classical"].estimate
        tol = resolve(args, cfg, "tolerance")
        tol = default_tolerance(a, b) if tol is None else float(tol)
        ok = abs(a - b) <= tol
        doc["agreement"] = {"e_star": a, "classical": b, "margin": abs(a - b), "tolerance": tol, "passed": ok}
        code = EXIT_OK if ok else EXIT_VERDICT
    dump(doc, out / f"{stem}.json")
    for key, rep in reports.items():
        write_columns(out / f"{stem}_{key}_rates.dat", rep.plot_rows(), ("t", "rate"))
        _say(f"{key}: estimate={rep.estimate:.6g} best_cell={rep.best_cell['delta']}")
    if "agreement" in doc:
        ag = doc["agreement"]
        _say(f"{'PASS' if ag['passed'] else 'FAIL'} agreement margin={ag['margin']:.3g} tol={ag['tolerance']:.3g}")
    _say(f"wrote {out / (stem + '.json')}")
    return code


def cmd_separate(args, cfg):
    fixture, params, flow = _fixture(args, cfg)
    seed = int(resolve(args, cfg, "seed", 0))
    jobs = int(resolve(args, cfg, "jobs", 1))
    t = float(resolve(args, cfg, "t", 4.0))
    dt = float(resolve(args, cfg, "dt", default_dt(flow)))
    delta = _delta(resolve(args, cfg, "delta", default_deltas(flow)[0]), flow)
    K = default_compact(flow, int(resolve(args, cfg, "depth", 8)), seed)
    rep = separation_report(flow, K, t, delta, dt, seed, int(resolve(args, cfg, "exact_threshold", 12)), jobs)
    out = _out_dir(args, cfg)
    stem = f"separate_{fixture.replace(':', '_')}"
    dump({"run": _run_header("separate", fixture, params, seed, {"K": K.region_descriptor}),
          "report": rep.to_dict()}, out / f"{stem}.json")
    (out / f"{stem}.csv").write_text(",".join(rep.CSV_HEADER) + "\n" + rep.csv_row() + "\n")
    _say(f"S_lower={rep.S_lower} R_upper={rep.R_upper} beta={rep.beta} method={rep.method}")
    return EXIT_OK


def cmd_falsify(args, cfg):
    fixture, params, flow = _fixture(args, cfg)
    seed = resolve(args, cfg, "seed")
    if seed is None:
        raise UsageError("falsify is stochastic: give --seed or set 'seed' in the config")
    jobs = int(resolve(args, cfg, "jobs", 1))
    notion = normalize_notion(resolve(args, cfg, "notion", "expansive"))
    eps = float(resolve(args, cfg, "eps", 1.0))
    default_delta = "jim" if notion == "topological_expansive" and fixture == "translation" else 0.05
    delta = _delta(resolve(args, cfg, "delta", default_delta), flow, eps)
    pairs = resolve(args, cfg, "pairs", 1000 if notion == "topological_expansive" else 64)
    budget = SearchBudget(pair_samples=int(pairs), knot_count=int(resolve(args, cfg, "knots", 33)),
                          window_T=float(resolve(args, cfg, "window", 20.0)),
                          dt=float(resolve(args, cfg, "dt", 0.05)), seed=int(seed),
                          iterations=int(resolve(args, cfg, "iterations", 100_000)),
                          margin=float(resolve(args, cfg, "margin", 1e-3)))
    verdict = falsify(flow, notion, eps, delta, budget, jobs)
    out = _out_dir(args, cfg)
    stem = f"falsify_{fixture.replace(':', '_')}_{notion}"
    dump({"run": _run_header("falsify", fixture, params, int(seed), {"delta": delta.name}),
          "verdict": verdict.to_dict()}, out / f"{stem}.json")
    if verdict.witness is not None:
        write_columns(out / f"{stem}_witness.dat", witness_plot_rows(flow, verdict.witness, delta, budget.dt),
                      ("t", "distance", "delta"))
        w = verdict.witness
        _say(f"witness_found max_discrepancy={w.max_discrepancy:.6g} distinctness={w.orbit_distinctness:.6g} "
             f"tail={w.tail_flag}")
    else:
        _say(f"no_witness pairs_screened={verdict.pairs_screened} iterations={verdict.iterations_used}")
    expect = resolve(args, cfg, "expect")
    if expect is not None:
        want = expect.replace("_", "-")
        if want not in ("witness", "no-witness"):
            raise UsageError("--expect must be 'witness' or 'no-witness'")
        if (want == "witness") != verdict.found:
            _say(f"FAIL expected {want}")
            return EXIT_VERDICT
    return EXIT_OK


def cmd_census(args, cfg):
    fixture, params, flow = _fixture(args, cfg, "suspension:full2")
    if not hasattr(flow, "sft"):
        raise UsageError("census needs a suspension fixture")
    census = orbit_census(flow.sft, float(resolve(args, cfg, "t_max", 12)))
    out = _out_dir(args, cfg)
    stem = f"census_{fixture.replace(':', '_')}"
    (out / f"{stem}.csv").write_text(census.to_csv())
    doc = {"run": _run_header("census", fixture, params, None), "census": census.to_dict()}
    if len(census.rows) >= 3:
        doc["growth"] = growth_rate(census).to_dict()
    dump(doc, out / f"{stem}.json")
    last = census.rows[-1]
    _say(f"v({last.flow_period:g})={last.v_cumulative} rows={len(census.rows)}")
    return EXIT_OK


def cmd_verify(args, cfg):
    suite = args.suite
    seed = int(resolve(args, cfg, "seed", 0))
    jobs = int(resolve(args, cfg, "jobs", 1))
    kw = {"seed": seed}
    if suite != "lemmas":
        kw["n_jobs"] = jobs
        t_max = resolve(args, cfg, "t_max")
        if t_max is not None:
            kw["t_max"] = float(t_max)
    if suite == "sa3":
        kw["a"] = float(resolve(args, cfg, "a", 2.0))
    if suite in ("sa1", "sa2", "sa4") and resolve(args, cfg, "tolerance") is not None:
        kw["tolerance"] = float(resolve(args, cfg, "tolerance"))
    if suite == "thB":
        kw["slack"] = float(resolve(args, cfg, "slack", 0.05))
    fixture = resolve(args, cfg, "fixture")
    if fixture is not None:
        fid = normalize_fixture_id(fixture)
        if not fid.startswith("suspension:") or suite in ("sa1", "lemmas"):
            raise UsageError(f"suite {suite} does not take fixture {fixture!r}")
        preset = fid.split(":", 1)[1]
        if suite in ("sa2", "thB"):
            kw["presets"] = (preset,)
        else:
            kw["preset"] = preset
    if suite == "lemmas" and resolve(args, cfg, "instances") is not None:
        kw["exact_instances"] = int(resolve(args, cfg, "instances"))
    result = run_suite(suite, **kw)
    out = _out_dir(args, cfg)
    dump({"run": _run_header("verify", fixture, {}, seed, {"suite": suite}), "result": result.to_dict()},
         out / f"verify_{suite}.json")
    for line in result.summary_lines():
        _say(line)
    return EXIT_OK if result.passed else EXIT_VERDICT


# -- parser -------------------------------------------------------------------
def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./expflow_out)")
    common.add_argument("--jobs", type=int, help="worker threads; results do not depend on it")
    common.add_argument("--seed", type=int, help="random seed")

    fix = argparse.ArgumentParser(add_help=False)
    fix.add_argument("--fixture", help="fixture id, e.g. suspension:full2 or punctured-sphere")
    fix.add_argument("--param", action="append", metavar="KEY=VALUE", help="fixture parameter (YAML value)")

    p = argparse.ArgumentParser(prog="expflow", description="Expansive flows: entropy, separation, falsifiers.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fixtures", parents=[common], help="list or describe built-in fixtures")
    f.add_argument("action", choices=["list", "show"])
    f.add_argument("name", nargs="?")
    f.add_argument("--json", action="store_true")

    e = sub.add_parser("estimate", parents=[common, fix], help="entropy or e* estimate")
    e.add_argument("--mode", help="classical | e-star | e-star-spanning | both")
    e.add_argument("--t-max", dest="t_max", type=float)
    e.add_argument("--t-grid", dest="t_grid", help="comma-separated times (overrides --t-max)")
    e.add_argument("--dt", type=float)
    e.add_argument("--deltas", help="comma-separated constant scales")
    e.add_argument("--depth", type=int, help="cylinder depth of the suspension compact")
    e.add_argument("--tolerance", type=float)

    s = sub.add_parser("separate", parents=[common, fix], help="S, R and beta for one horizon")
    s.add_argument("--t", type=float)
    s.add_argument("--dt", type=float)
    s.add_argument("--delta")
    s.add_argument("--depth", type=int)
    s.add_argument("--exact-threshold", dest="exact_threshold", type=int)

    x = sub.add_parser("falsify", parents=[common, fix], help="search for an expansivity witness")
    x.add_argument("--notion", help="expansive | topological | rescaling")
    x.add_argument("--eps", type=float)
    x.add_argument("--delta", help="number, 'jim' or 'vanishing:c'")
    x.add_argument("--pairs", type=int)
    x.add_argument("--iterations", type=int)
    x.add_argument("--knots", type=int)
    x.add_argument("--window", type=float)
    x.add_argument("--dt", type=float)
    x.add_argument("--margin", type=float)
    x.add_argument("--expect", help="witness | no-witness; mismatch exits with 2")

    c = sub.add_parser("census", parents=[common, fix], help="periodic-orbit census of a suspension")
    c.add_argument("--t-max", dest="t_max", type=float)

    v = sub.add_parser("verify", parents=[common, fix], help="run a verification suite")
    v.add_argument("suite", choices=SUITES)
    v.add_argument("--a", type=float)
    v.add_argument("--t-max", dest="t_max", type=float)
    v.add_argument("--slack", type=float)
    v.add_argument("--tolerance", type=float)
    v.add_argument("--instances", type=int)
    return p


COMMANDS = {"fixtures": cmd_fixtures, "estimate": cmd_estimate, "separate": cmd_separate,
            "falsify": cmd_falsify, "census": cmd_census, "verify": cmd_verify}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config, args.command) if args.config else LoadedConfig({})
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, DomainEscape) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
