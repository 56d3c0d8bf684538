"""Command-line entry point: ``bdt {synth,train,predict,select,importance,crossval}``.

Exit codes: 0 on success, 1 for data or runtime errors, 2 for usage errors.
The seed comes from ``--seed``, else the ``BDT_SEED`` environment variable,
else 0.  All randomness uses numpy's PCG64 generator seeded from it.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .core import BDTError, ConfigError, Dataset, Hyperparameters, InputError, PRIOR_KINDS
from .crossval import HEADER, cross_validate, summarize, write_results
from .data import FOLD_STRATEGIES, SynthConfig, encode_labels, generate_synthetic_stca, load_csv, make_folds, read_table, write_csv
from .diagram import render_diagram
from .ensemble import Ensemble, classify_with_envelope, feature_importance
from .likelihood import PriorConfig
from .model import load_model, save_model
from .sampler import PHASES, run_chain
from .selection import METHODS, select, write_scores


class UsageError(Exception):
    pass


def resolve_seed(seed: int | None) -> int:
    if seed is not None:
        return seed
    env = os.environ.get("BDT_SEED")
    if env is None or env.strip() == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"BDT_SEED must be an integer, got {env!r}") from None


def _move_probs(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected four comma-separated numbers, got {text!r}") from None
    if len(vals) != 4:
        raise argparse.ArgumentTypeError(f"expected four comma-separated numbers, got {text!r}")
    return vals


def diagnostics_path(model_path) -> Path:
    p = Path(model_path)
    return p.with_name(p.stem + ".diagnostics.csv")


def _training_flags(p: argparse.ArgumentParser) -> None:
    d = Hyperparameters()
    g = p.add_argument_group("sampler")
    g.add_argument("--pmin", type=int, default=d.p_min, help="minimum points per leaf (default %(default)s)")
    g.add_argument("--burnin", type=int, default=d.burn_in, help="burn-in iterations (default %(default)s)")
    g.add_argument("--postburnin", type=int, default=d.post_burn_in, help="collection iterations (default %(default)s)")
    g.add_argument("--thin", type=int, default=d.thin, help="keep every n-th post-burn-in tree (default %(default)s)")
    g.add_argument("--proposal-std", type=float, default=d.proposal_std,
                   help="threshold random-walk std on the normalised scale (default %(default)s)")
    g.add_argument("--move-probs", type=_move_probs, default=d.move_probs,
                   help="birth,death,change-split,change-rule (default 0.1,0.1,0.2,0.6)")
    g.add_argument("--alpha", type=float, default=d.alpha, help="Dirichlet concentration (default %(default)s)")
    g.add_argument("--prior", choices=PRIOR_KINDS, default=d.prior)
    g.add_argument("--gamma-split", type=float, default=d.gamma_split, help="chipman prior base split probability")
    g.add_argument("--delta-split", type=float, default=d.delta_split, help="chipman prior depth decay")
    g.add_argument("--max-leaves", type=int, default=None, help="cap on the leaf count (default n-1)")
    g.add_argument("--seed", type=int, default=None, help="random seed (default $BDT_SEED or 0)")


def _hyper(args, gamma0: float = 0.99) -> Hyperparameters:
    return Hyperparameters(
        p_min=args.pmin,
        move_probs=args.move_probs,
        proposal_std=args.proposal_std,
        burn_in=args.burnin,
        post_burn_in=args.postburnin,
        thin=args.thin,
        gamma0=gamma0,
        alpha=args.alpha,
        prior=args.prior,
        gamma_split=args.gamma_split,
        delta_split=args.delta_split,
        seed=resolve_seed(args.seed),
        max_leaves=args.max_leaves,
    )


def _fmt_rate(r) -> str:
    return "n/a" if r is None or r != r else f"{r:.4f}"


# commands -------------------------------------------------------------------

def cmd_synth(args) -> int:
    cfg = SynthConfig(
        pair_count=args.pairs,
        cycles_per_pair=args.cycles,
        alert_distance=args.alert_distance,
        noise_std=args.noise,
        velocity_noise_std=args.velocity_noise,
        label_flip_rate=args.flip_rate,
        look_ahead=args.look_ahead,
        seed=resolve_seed(args.seed),
    )
    data = generate_synthetic_stca(cfg)
    write_csv(data, args.out)
    print(f"wrote {data.n} rows to {args.out} (alert rate {data.labels.mean():.3f})")
    return 0


def cmd_train(args) -> int:
    hyper = _hyper(args)
    data = load_csv(args.data, args.label)
    ens, diag = run_chain(data, hyper)
    save_model(ens, args.out)
    diag_path = diagnostics_path(args.out)
    diag.to_csv(diag_path)
    for phase in PHASES:
        print(f"acceptance {phase}: {_fmt_rate(diag.acceptance_rate(phase))}")
    print(f"converged: {diag.converged}")
    print(f"ensemble size: {len(ens)}")
    print(f"wrote {args.out} and {diag_path}")
    return 0


def _load_inputs(path, ens, label: str | None) -> Dataset | np.ndarray:
    names, X, raw = read_table(path, label)
    if X.shape[1] != ens.m:
        raise InputError(f"schema mismatch: model expects {ens.m} features, {path} has {X.shape[1]}")
    if raw is None:
        return X
    if ens.class_names is not None:
        index = {c: i for i, c in enumerate(ens.class_names)}
        unknown = sorted(set(raw) - set(index))
        if unknown:
            raise InputError(f"labels {unknown} are not classes of the model {list(ens.class_names)}")
        y = np.array([index[c] for c in raw], dtype=np.intp)
        return Dataset(X, y, names, ens.class_count, label, ens.class_names)
    y, C, _ = encode_labels(raw)
    return Dataset(X, y, names, max(C, ens.class_count), label)


def cmd_predict(args) -> int:
    ens = load_model(args.model)
    label = args.label
    if label is None:
        names, _, _ = read_table(args.data)
        label = ens.label_name if ens.label_name in names else None
    data = _load_inputs(args.data, ens, label)
    report = classify_with_envelope(ens, data, args.gamma0)
    if args.out:
        report.to_csv(args.out)
    rates = report.rates()
    print(f"rows: {len(report.outcomes)}  confident: {report.confident_fraction:.4f}")
    if rates is not None:
        for k in ("confident_correct", "confident_incorrect", "uncertain", "misclassification"):
            print(f"{k}: {rates[k]:.4f}")
    return 0


def cmd_select(args) -> int:
    if args.method in ("sc", "map") and args.data is None:
        raise UsageError(f"--method {args.method} needs --data")
    if args.audit and args.method != "map":
        raise UsageError("--audit only applies to --method map")
    ens = load_model(args.model)
    train = None
    if args.data is not None:
        train = load_csv(args.data, args.label or ens.label_name)
        if train.m != ens.m:
            raise InputError(f"schema mismatch: model expects {ens.m} features, {args.data} has {train.m}")
    gamma0 = args.gamma0 if args.gamma0 is not None else getattr(ens.hyper, "gamma0", 0.99)
    prior = PriorConfig.from_hyper(ens.hyper) if ens.hyper is not None else None
    report = select(args.method, ens, train, gamma0, args.threshold_tol, prior)

    single = Ensemble(
        [report.tree], ens.class_count, ens.feature_names, ens.feature_ranges,
        hyper=ens.hyper, alpha=ens.alpha, label_name=ens.label_name, class_names=ens.class_names,
        chain={"selection": report.summary()},
    )
    out = Path(args.out)
    save_model(single, out)
    label = ens.class_names[-1] if ens.class_names is not None else ens.label_name
    diagram = render_diagram(report.tree, ens.feature_names, label, ens.alpha, args.digits)
    diagram_path = Path(args.diagram) if args.diagram else out.with_suffix(".txt")
    diagram_path.write_text(diagram, encoding="utf-8")
    s = report.summary()
    print(f"method: {args.method}  tree index: {s['index']}  nodes: {s['size']}  leaves: {s['leaves']}")
    if report.set_sizes is not None:
        print(f"S1/S2/S3 sizes: {report.set_sizes[0]}/{report.set_sizes[1]}/{report.set_sizes[2]}"
              f"  coverage: {report.coverage} of {report.confident_correct} confident-correct rows")
    if report.scores is not None:
        print(f"log posterior score: {s['score']!r}")
    if report.group_weights is not None:
        print(f"groups: {len(report.group_weights)}  top weight: {report.group_weights[0]:.4f}")
    if args.audit:
        audit = out.with_name(out.stem + ".scores.csv")
        write_scores(report, ens, audit)
        print(f"wrote {audit}")
    print(f"wrote {out} and {diagram_path}")
    print(diagram, end="")
    return 0


def cmd_importance(args) -> int:
    ens = load_model(args.model)
    w, ranks = feature_importance(ens)
    order = np.argsort(ranks)
    lines = ["feature,weight,rank"] + [f"{ens.feature_names[j]},{float(w[j])!r},{ranks[j]}" for j in order]
    for j in order:
        print(f"{ranks[j]:>3}  {ens.feature_names[j]:<12} {w[j]:.4f}")
    print(f"sum {w.sum():.3f}")
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return 0


def cmd_crossval(args) -> int:
    hyper = _hyper(args, args.gamma0)
    data = load_csv(args.data, args.label)
    plan = make_folds(data, args.folds, args.strategy, hyper.seed)
    results = cross_validate(data, plan, hyper, args.gamma0, args.threshold_tol, args.jobs)
    print("  ".join(h for h in HEADER[:10]))
    for r in results:
        cells = r.row()[:10]
        print("  ".join(f"{c:.4f}" if isinstance(c, float) else str(c) for c in cells))
    s = summarize(results)
    print("mean  " + "  ".join(f"{k}={v:.4f}" for k, v in s.items()))
    if args.out:
        write_results(results, args.out)
        print(f"wrote {args.out}")
    return 0


# parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bdt", description="Bayesian decision-tree ensembles by reversible-jump MCMC.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a synthetic conflict-alert dataset")
    d = SynthConfig()
    s.add_argument("--pairs", type=int, default=d.pair_count)
    s.add_argument("--cycles", type=int, default=d.cycles_per_pair)
    s.add_argument("--alert-distance", type=float, default=d.alert_distance)
    s.add_argument("--noise", type=float, default=d.noise_std, help="position noise std")
    s.add_argument("--velocity-noise", type=float, default=d.velocity_noise_std)
    s.add_argument("--flip-rate", type=float, default=d.label_flip_rate)
    s.add_argument("--look-ahead", type=float, default=d.look_ahead, help="seconds of predicted flight in the label")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    t = sub.add_parser("train", help="sample an ensemble and save it")
    t.add_argument("--data", required=True)
    t.add_argument("--label", default="alert")
    t.add_argument("--out", required=True, help="model file (.json)")
    _training_flags(t)
    t.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", help="classify rows with the uncertainty envelope")
    pr.add_argument("--model", required=True)
    pr.add_argument("--data", required=True)
    pr.add_argument("--label", default=None, help="label column (default: the model's, when present)")
    pr.add_argument("--gamma0", type=float, default=0.99)
    pr.add_argument("--out", default=None, help="envelope CSV")
    pr.set_defaults(func=cmd_predict)

    se = sub.add_parser("select", help="extract a single tree")
    se.add_argument("--model", required=True)
    se.add_argument("--data", default=None, help="training data (needed by sc and map)")
    se.add_argument("--label", default=None)
    se.add_argument("--method", choices=METHODS, default="sc")
    se.add_argument("--gamma0", type=float, default=None, help="default: the model's")
    se.add_argument("--threshold-tol", type=float, default=0.01, help="mapw threshold tolerance, normalised scale")
    se.add_argument("--out", required=True, help="single-tree model file (.json)")
    se.add_argument("--diagram", default=None, help="diagram file (default: OUT with .txt)")
    se.add_argument("--digits", type=int, default=None, help="round diagram thresholds")
    se.add_argument("--audit", action="store_true", help="with map, dump every tree's score")
    se.set_defaults(func=cmd_select)

    im = sub.add_parser("importance", help="posterior feature weights")
    im.add_argument("--model", required=True)
    im.add_argument("--out", default=None)
    im.set_defaults(func=cmd_importance)

    cv = sub.add_parser("crossval", help="compare ensemble, sc, map and mapw on held-out data")
    cv.add_argument("--data", required=True)
    cv.add_argument("--label", default="alert")
    cv.add_argument("--folds", type=int, default=5)
    cv.add_argument("--strategy", choices=FOLD_STRATEGIES, default="repeated-halves")
    cv.add_argument("--gamma0", type=float, default=0.99)
    cv.add_argument("--threshold-tol", type=float, default=0.01)
    cv.add_argument("--jobs", type=int, default=1)
    cv.add_argument("--out", default=None, help="per-fold CSV")
    _training_flags(cv)
    cv.set_defaults(func=cmd_crossval)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        parser.print_usage(sys.stderr)
        print(f"bdt {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (BDTError, OSError, ValueError) as exc:
        print(f"bdt {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
