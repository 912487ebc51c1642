"""Command-line front end: ``datacomp --config c.json --out dir <command> ...``.

Exit codes: 0 success, 1 validation failure, 2 infeasible design,
3 numerical failure (separation or non-convergence).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.stats import norm

from . import eda, io
from ._utils import atomic_write_text
from .config import CompetitionConfig
from .design import assign_splits, check_split_invariants
from .domain import NO_SOURCE, Split, classify_outcome, select_test_runs
from .exceptions import CompetitionError, ValidationError
from .inference import (
    default_grid,
    default_pool,
    difference_surface,
    fit_linear,
    fit_logistic,
    predict_surface,
    probability_of_agreement,
    select_model,
)
from .inference.glm import BINOMIAL, GAUSSIAN
from .inference.terms import TermSpec
from .scoring import (
    Leaderboard,
    ScoreWeights,
    generate_mock_submissions,
    parse_pattern,
    parse_timestamp,
    score_run,
    score_submission,
    update_leaderboard,
    weight_robustness,
)
from .simulate import simulate_competition

log = logging.getLogger("datacomp")


def _dump(obj):
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def _need(value, what):
    if value is None:
        raise ValidationError(f"config has no '{what}' section")
    return value


def _key(cfg, paths, args):
    path = getattr(args, "key", None) or paths["host_manifest"]
    return io.read_manifest(path, cfg.factor_space)


# --- commands ----------------------------------------------------------------


def cmd_simulate(cfg, paths, args):
    truth = _need(cfg.truth, "truth")
    spec = _need(cfg.superset, "superset")
    sim = simulate_competition(truth, cfg.factor_space, cfg.catalog, spec, cfg.seed)
    names = cfg.factor_space.names
    io.write_manifest(paths["superset"], sim.superset, names, include_split=False)
    if args.test_manifest:
        run_ids = io.read_run_ids(args.test_manifest)
    else:
        run_ids = [r.run_id for r in sim.superset]
    for team in sorted(sim.answers):
        io.write_submission(paths["teams_dir"] / f"{team}.csv", sim.submission_for(team, run_ids))
    print(_dump({"superset": str(paths["superset"]), "runs": len(sim.superset), "teams": sorted(sim.answers)}), end="")
    return 0


def cmd_design(cfg, paths, args):
    split_cfg = _need(cfg.split, "split")
    superset = io.read_manifest(args.superset or paths["superset"], cfg.factor_space)
    assignment = assign_splits(superset, split_cfg, cfg.factor_space)
    report = check_split_invariants(assignment, split_cfg, superset, cfg.factor_space)
    if not report.passed:
        raise ValidationError(f"split invariants violated: {report.failures()}")
    runs = assignment.apply(superset)
    names = cfg.factor_space.names
    io.write_manifest(paths["host_manifest"], runs, names)
    io.write_csv(paths["test_manifest"], ["run_id"], [[rid] for rid in assignment.test_manifest])
    train = [r for r in runs if r.split is Split.TRAIN]
    io.write_manifest(paths["train_manifest"], train, names, include_split=False)
    counts = {
        str(s): dict(sorted(_count_categories(r for r in runs if r.split is s).items()))
        for s in (Split.TRAIN, Split.PUBLIC, Split.PRIVATE, Split.DISCARDED)
    }
    summary = {"invariants": report.to_dict(), "counts": counts, "test_runs": len(assignment.test_manifest)}
    atomic_write_text(paths["design_report"], _dump(summary))
    print(_dump({"passed": report.passed, "counts": counts}), end="")
    return 0


def _count_categories(runs):
    out = {}
    for r in runs:
        out[r.true_category] = out.get(r.true_category, 0) + 1
    return out


def _load_board(path):
    path = Path(path)
    if not path.exists():
        return Leaderboard()
    return Leaderboard.from_dict(json.loads(path.read_text(encoding="utf-8")))


def cmd_score(cfg, paths, args):
    weights = _need(cfg.weights, "weights")
    key = _key(cfg, paths, args)
    team = args.team or Path(args.submission).stem
    ts = parse_timestamp(args.timestamp) if args.timestamp else datetime.now(timezone.utc)
    sub = io.read_submission(args.submission, team, ts)
    public, private = score_submission(sub, key, weights, cfg.catalog)
    board = _load_board(paths["board"])
    board = update_leaderboard(board, team, ts, (public, private), cfg.policy)
    atomic_write_text(paths["board"], _dump(board.to_dict()))
    print(_dump({"team_id": team, "public_score": public, "private_score": private, "accepted": True}), end="")
    return 0


def cmd_leaderboard(cfg, paths, args):
    board = _load_board(paths["board"])
    which = "private" if args.private else "public"
    table = [e.to_dict() for e in board.ranked(which)]
    atomic_write_text(paths["reports_dir"] / f"leaderboard_{which}.json", _dump(table))
    print(_dump(table), end="")
    return 0


def cmd_mock(cfg, paths, args):
    key = _key(cfg, paths, args)
    patterns = [parse_pattern(p) for p in (args.pattern or ["all_correct"])]
    for sub in generate_mock_submissions(key, patterns, cfg.catalog):
        io.write_submission(paths["mocks_dir"] / f"{sub.team_id}.csv", sub)
        print(paths["mocks_dir"] / f"{sub.team_id}.csv")
    return 0


def _default_patterns(cfg):
    first = cfg.catalog.sources[0]
    return ["all_correct", f"except:{first}:miss", "offset:1", "all_no_source"]


def cmd_weights_check(cfg, paths, args):
    key = _key(cfg, paths, args)
    data = json.loads(Path(args.weights).read_text(encoding="utf-8"))
    candidates = [ScoreWeights.from_dict(d) for d in (data if isinstance(data, list) else [data])]
    patterns = [parse_pattern(p) for p in (args.pattern or _default_patterns(cfg))]
    mocks = generate_mock_submissions(key, patterns, cfg.catalog)
    table = weight_robustness(mocks, candidates, key, cfg.catalog)
    atomic_write_text(paths["reports_dir"] / "weights_check.json", _dump(table.to_dict()))
    print(_dump(table.to_dict()), end="")
    return 0


# --- analyze -----------------------------------------------------------------


def _outcomes(cfg, key, path, split=None):
    team = Path(path).stem
    sub = io.read_submission(path, team, datetime(1970, 1, 1, tzinfo=timezone.utc))
    entries = sub.by_run()
    runs = [r for r in select_test_runs(key) if split is None or str(r.split) == split]
    missing = [r.run_id for r in runs if r.run_id not in entries]
    if missing:
        raise ValidationError(f"{path}: no answer for {len(missing)} run(s), e.g. {missing[:5]}")
    return team, [classify_outcome(r, entries[r.run_id]) for r in runs], runs


def _parse_fixed(items, factor_space):
    out = {}
    for item in items or []:
        name, _, value = item.partition("=")
        if name not in factor_space:
            raise ValidationError(f"unknown factor {name!r}")
        out[name] = factor_space[name].coerce(value)
    return out


def _response(outcomes, runs, response, category):
    rows, y = [], []
    for o, r in zip(outcomes, runs):
        if category == NO_SOURCE:
            if r.has_source:
                continue
            rows.append(dict(r.factor_values))
            y.append(float(o.outcome_class.value == "TN"))
            continue
        if r.true_category != category:
            continue
        if response == "detect":
            y.append(float(o.det))
        elif response == "identify":
            y.append(float(o.iden))
        elif o.loc_miss_s is not None:
            y.append(float(o.loc_miss_s))
        else:
            continue
        rows.append(dict(r.factor_values))
    if not rows:
        raise ValidationError(f"no runs for category {category!r} and response {response!r}")
    return pd.DataFrame(rows), np.array(y)


def _model_terms(cfg, args, X):
    if args.terms:
        return TermSpec([t for t in args.terms.split(",") if t.strip()])
    factors = args.factors.split(",") if args.factors else [
        f.name for f in cfg.factor_space.modeled if f.name in X.columns and X[f.name].nunique() > 1
    ]
    cont = [f for f in factors if cfg.factor_space[f].is_continuous]
    cat = [f for f in factors if not cfg.factor_space[f].is_continuous]
    return default_pool(cont, cat)


def _categorical(cfg):
    return tuple(f.name for f in cfg.factor_space if not f.is_continuous)


def _fit(cfg, args, X, y):
    terms = _model_terms(cfg, args, X)
    family = GAUSSIAN if args.response == "miss" else BINOMIAL
    cats = tuple(c for c in _categorical(cfg) if c in terms.factors)
    levels = {c: cfg.factor_space[c].levels for c in cats}
    if args.terms:
        fitter = fit_linear if family == GAUSSIAN else fit_logistic
        return fitter(X, y, terms, categorical=cats, levels=levels), None
    sel = select_model(X, y, terms, alpha=args.alpha, family=family, categorical=cats, levels=levels)
    return sel.fit, sel


def _grid(cfg, args, fit):
    fixed = _parse_fixed(args.fixed, cfg.factor_space)
    x, yname = args.x, args.y
    if not x or not yname:
        cont = [f for f in fit.terms.factors if cfg.factor_space[f].is_continuous]
        if len(cont) < 2:
            raise ValidationError("choose the displayed factors with --x and --y")
        x, yname = x or cont[0], yname or cont[1]
    for f in fit.terms.factors:
        if f not in (x, yname) and f not in fixed:
            spec = cfg.factor_space[f]
            fixed[f] = spec.levels[0] if not spec.is_continuous else 0.5 * (spec.lo + spec.hi)
    return default_grid(cfg.factor_space, x, yname, fixed, n=args.grid), x, yname


def _surface_rows(grid, x, y, cols):
    n = len(grid)
    rows = []
    for i in range(n):
        rows.append([grid[x].iloc[i], grid[y].iloc[i]] + [c[i] for c in cols])
    return rows


def cmd_analyze(cfg, paths, args):
    key = _key(cfg, paths, args)
    out = paths["reports_dir"]
    subs = args.submission or []
    split = args.split
    kind = args.what
    if kind == "confusion":
        _, outs, _ = _outcomes(cfg, key, _one(subs), split)
        det = eda.detection_confusion(outs)
        ident = eda.identification_confusion(outs, cfg.catalog)
        header = ["true", "predicted", "count", "proportion"]
        io.write_csv(out / "detection_confusion.csv", header, det.long_rows())
        io.write_csv(out / "identification_confusion.csv", header, ident.long_rows())
        print(out / "detection_confusion.csv")
        print(out / "identification_confusion.csv")
    elif kind == "agreement":
        a, b = _two(subs)
        _, oa, runs = _outcomes(cfg, key, a, split)
        _, ob, _ = _outcomes(cfg, key, b, split)
        if args.category:
            keep = {r.run_id for r in runs if r.true_category == args.category}
            oa = [o for o in oa if o.run_id in keep]
            ob = [o for o in ob if o.run_id in keep]
        table = eda.team_agreement(oa, ob)
        io.write_csv(out / "agreement.csv", ["class_a", "class_b", "count", "fraction"], table.long_rows())
        print(_dump({"total": table.total, "off_diagonal": table.off_diagonal}), end="")
    elif kind == "bars":
        sets = {}
        for path in subs:
            team, outs, _ = _outcomes(cfg, key, path, split)
            sets[team] = outs
        scores = None
        if cfg.weights is not None:
            scores = {t: float(np.mean([score_run(o, cfg.weights) for o in outs])) for t, outs in sets.items()}
        rows = eda.outcome_by_source(sets, cfg.catalog, scores)
        io.write_csv(out / "bars.csv", ["category", "team_id", "n", "p_I", "p_D", "p_X"],
                     [[r.category, r.team_id, r.n, r.p_i, r.p_d, r.p_x] for r in rows])
        print(out / "bars.csv")
    elif kind == "scatter":
        where = eda.make_filter(category=args.category, **_parse_fixed(args.where, cfg.factor_space))
        if len(subs) == 2:
            _, oa, runs = _outcomes(cfg, key, subs[0], split)
            _, ob, _ = _outcomes(cfg, key, subs[1], split)
            pts = eda.export_pair_scatter(oa, ob, runs, args.x, args.y, where)
        else:
            _, oa, runs = _outcomes(cfg, key, _one(subs), split)
            pts = eda.export_scatter(oa, runs, args.x, args.y, where)
        io.write_csv(out / "scatter.csv", ["run_id", "x", "y", "class"],
                     [[p.run_id, p.x, p.y, p.outcome] for p in pts])
        print(out / "scatter.csv")
    elif kind == "glm":
        _, outs, runs = _outcomes(cfg, key, _one(subs), split)
        X, y = _response(outs, runs, args.response, _need(args.category, "--category"))
        fit, sel = _fit(cfg, args, X, y)
        report = fit.to_dict()
        report["lack_of_fit_p"] = None if sel is None else sel.lack_of_fit_p
        report["dropped_terms"] = [] if sel is None else sel.dropped
        atomic_write_text(out / "glm_fit.json", _dump(report))
        grid, x, yname = _grid(cfg, args, fit)
        s = predict_surface(fit, grid)
        io.write_csv(out / "surface.csv", ["x", "y", "estimate", "se", "lower", "upper"],
                     _surface_rows(grid, x, yname, [s.estimate, s.se, s.lower, s.upper]))
        print(out / "glm_fit.json")
        print(out / "surface.csv")
    elif kind in ("compare", "pa"):
        a, b = _two(subs)
        if args.response == "miss":
            raise ValidationError("team comparisons use the detect or identify response")
        fits = []
        for path in (a, b):
            _, outs, runs = _outcomes(cfg, key, path, split)
            X, y = _response(outs, runs, args.response, _need(args.category, "--category"))
            fits.append(_fit(cfg, args, X, y)[0])
        grid, x, yname = _grid(cfg, args, fits[0])
        if kind == "compare":
            d = difference_surface(fits[0], fits[1], grid, scale=args.scale)
            z = norm.ppf(0.975)
            io.write_csv(
                out / "difference.csv",
                ["x", "y", "estimate", "se", "lower", "upper", "raw_p", "adj_p", "bucket"],
                _surface_rows(grid, x, yname, [d.delta, d.se, d.delta - z * d.se, d.delta + z * d.se,
                                              d.raw_p, d.adj_p, d.bucket]),
            )
            print(out / "difference.csv")
        else:
            pa = probability_of_agreement(fits[0], fits[1], grid, args.delta)
            io.write_csv(out / "agreement_probability.csv", ["x", "y", "pa"],
                         _surface_rows(grid, x, yname, [pa]))
            print(out / "agreement_probability.csv")
    return 0


def _one(subs):
    if len(subs) != 1:
        raise ValidationError("give exactly one --submission")
    return subs[0]


def _two(subs):
    if len(subs) != 2:
        raise ValidationError("give exactly two --submission files")
    return subs


# --- parser ------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="datacomp", description=__doc__.splitlines()[0])
    p.add_argument("--config", required=True, help="competition config JSON")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a synthetic superset and team answers")
    s.add_argument("--test-manifest", help="restrict team files to these runs, in this order")

    s = sub.add_parser("design", help="assign TRAIN / PUBLIC / PRIVATE splits")
    s.add_argument("--superset", help="superset manifest (default: <out>/superset.csv)")

    s = sub.add_parser("score", help="score a submission and update the leaderboard")
    s.add_argument("--submission", required=True)
    s.add_argument("--team")
    s.add_argument("--timestamp", help="ISO-8601; default now (UTC)")
    s.add_argument("--key", help="host manifest (default: <out>/host_manifest.csv)")

    s = sub.add_parser("leaderboard", help="print the public or private board")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--public", action="store_true")
    g.add_argument("--private", action="store_true")

    s = sub.add_parser("mock", help="write mock submissions with systematic errors")
    s.add_argument("--pattern", action="append")
    s.add_argument("--key")

    s = sub.add_parser("weights-check", help="rank mock submissions under candidate weights")
    s.add_argument("--weights", required=True, help="JSON object or list of weight objects")
    s.add_argument("--pattern", action="append")
    s.add_argument("--key")

    s = sub.add_parser("analyze", help="post-competition analysis reports")
    s.add_argument("what", choices=["confusion", "agreement", "bars", "scatter", "glm", "compare", "pa"])
    s.add_argument("--submission", action="append", help="submission CSV (repeat for several teams)")
    s.add_argument("--key")
    s.add_argument("--split", choices=["PUBLIC", "PRIVATE"], help="default: both test splits")
    s.add_argument("--category")
    s.add_argument("--response", choices=["detect", "identify", "miss"], default="identify")
    s.add_argument("--terms", help="comma-separated model terms; skips model selection")
    s.add_argument("--factors", help="comma-separated factors for the default term pool")
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--x")
    s.add_argument("--y")
    s.add_argument("--fixed", action="append", help="name=value for off-axis factors")
    s.add_argument("--where", action="append", help="name=value scatter filter")
    s.add_argument("--grid", type=int, default=50)
    s.add_argument("--scale", choices=["probability", "logit"], default="probability")
    s.add_argument("--delta", type=float, default=0.05)
    return p


COMMANDS = {
    "simulate": cmd_simulate,
    "design": cmd_design,
    "score": cmd_score,
    "leaderboard": cmd_leaderboard,
    "mock": cmd_mock,
    "weights-check": cmd_weights_check,
    "analyze": cmd_analyze,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = CompetitionConfig.load(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        paths = cfg.resolved_paths(args.out)
        return COMMANDS[args.command](cfg, paths, args)
    except CompetitionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
