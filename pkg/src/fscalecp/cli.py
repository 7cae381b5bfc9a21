"""Command-line entry point: ``fscalecp synth|train|simulate|evaluate|report``.

Exit codes: 0 ok, 1 runtime error, 2 usage error, 3 data validation or
model schema error, 4 missing input file, 5 feature dimension mismatch.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from .baselines import LRCQ_VARIANTS, LrcqModel, lrcq_train
from .cascade import CascadeState, ValidationError
from .data import cascade_lines, load_dataset, save_dataset, split_ids
from .evaluation import (CHECKPOINTS, EXPERIMENTS, FRACTIONS, SIZE_GROUPS, ExperimentConfig, believable_prefix,
                         read_csv, summarize, write_csv)
from .learners import KINDS, DimensionError
from .pipeline import MODEL_FORMAT, LearnConfig, TrainedModel, learn
from .propagation import MODES, SimConfig, ThresholdRule, run, write_trace
from .synth import PlantedLogistic, synth

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_DATA, EXIT_MISSING, EXIT_DIMENSION = 0, 1, 2, 3, 4, 5

logger = logging.getLogger("fscalecp")


class SchemaError(ValidationError):
    """A model file does not follow the model JSON format."""


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _write_json(path: str | Path, obj: Any) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


def load_model(path: str | Path):
    """Any model file written by ``train`` (or a planted rule written by ``synth``)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise SchemaError(f"{path}: not JSON ({exc})") from exc
    if not isinstance(d, dict) or d.get("format") != MODEL_FORMAT:
        raise SchemaError(f"{path}: expected format {MODEL_FORMAT!r}")
    variant = d.get("variant")
    try:
        if variant == "fscalecp":
            return TrainedModel.from_dict(d)
        if variant in LRCQ_VARIANTS:
            return LrcqModel.from_dict(d)
        if variant == "threshold":
            return ThresholdRule(int(d["theta"]))
        if variant == "planted-logistic":
            return PlantedLogistic(d["coef"], float(d["bias"]))
    except DimensionError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: malformed {variant} model ({exc})") from exc
    raise SchemaError(f"{path}: unknown model variant {variant!r}")


def cmd_synth(args) -> None:
    planted = ThresholdRule(args.threshold) if args.threshold else None
    data = synth(args.nodes, args.messages, args.seed, args.m_per_node, args.reciprocity, args.topics,
                 planted, args.n_seeds, args.test_frac)
    save_dataset(data, args.out)
    rule = planted if planted is not None else PlantedLogistic()
    _write_json(Path(args.out) / "planted.json", rule.to_dict())
    sizes = sorted((len(c) for c in data.corpus.cascades.values()), reverse=True)
    print(f"wrote {args.out}: {data.graph.n} nodes, {data.graph.n_edges} edges, "
          f"{len(sizes)} cascades (largest {sizes[:5]})")


def cmd_train(args) -> None:
    data = load_dataset(args.data)
    train_ids, _ = split_ids(data) if not args.all_cascades else (list(data.corpus.cascades), None)
    if args.variant == "fscalecp":
        hyper = json.loads(args.hyper) if args.hyper else {}
        cfg = LearnConfig(kinds=tuple(args.kinds), folds=args.folds, seed=args.seed,
                          sfbs_folds=args.sfbs_folds, max_instances=args.max_instances, hyper=hyper,
                          message_ids=train_ids)
        model = learn(data, cfg)
        prov = model.provenance
        print("candidate accuracy (10-fold CV)" if args.folds == 10 else f"candidate accuracy ({args.folds}-fold CV)")
        for kind, acc in prov["candidate_accuracy"].items():
            mark = " *" if kind == model.classifier.kind else ""
            print(f"  {kind:8s} {acc:.4f}{mark}")
        print(f"selected {len(model.selected)} features, CV accuracy {prov['selected_accuracy']:.4f} "
              f"(all features {prov['all_features_accuracy']:.4f})")
        for row in prov["weight_table"]:
            print(f"  {row['feature']:14s} {row['mechanism']}  {row['weight']:.4f}")
        print("mechanism measure: " + ", ".join(f"{k} {v:.4f}" for k, v in model.to_dict()["mechanism_measure"].items()))
        out = model.to_dict()
    else:
        params = {"restart": args.restart, "mu": args.mu}
        if args.variant == "lrcq2":
            params.update(a=args.a, b=args.b, decay_scale=args.lrcq2_decay)
        model = lrcq_train(args.variant, data, args.seed, args.folds, max_instances=args.max_instances,
                           message_ids=train_ids, **params)
        print(f"{args.variant}: CV accuracy {model.provenance['cv_accuracy']:.4f} "
              f"on {model.provenance['n_instances']} instances")
        out = model.to_dict()
    _write_json(args.out, out)


def cmd_simulate(args) -> None:
    data = load_dataset(args.data)
    model = load_model(args.model)
    if args.cascade not in data.corpus.cascades:
        raise ValidationError(f"unknown cascade {args.cascade!r}")
    truth = data.corpus.cascades[args.cascade]
    observed = believable_prefix(truth, args.observe_frac)
    state = CascadeState.from_events(data.graph, truth.message_id, observed.events)
    cfg = SimConfig(args.delta_t, args.horizon, args.seed, args.mode, args.patience)
    res = run(data, state, model, cfg)
    with open(args.out, "w", encoding="utf-8") as fh:
        for line in cascade_lines(res.cascade, data.graph):
            fh.write(line + "\n")
    if args.trace:
        write_trace(args.trace, res.trace)
    print(f"{args.cascade}: observed {len(observed)} of {len(truth)} events, predicted {len(res.cascade)} "
          f"after {len(res.trace)} steps ({res.stop_reason})")


def _method_names(paths: Sequence[str], models: Sequence[Any]) -> list[str]:
    names = [getattr(m, "variant", "model") for m in models]
    if len(set(names)) < len(names):
        names = [Path(p).stem for p in paths]
    if len(set(names)) < len(names):
        raise ValidationError("model names collide; give the files distinct names")
    return names


def cmd_evaluate(args) -> None:
    data = load_dataset(args.data)
    paths = [p for p in args.models.split(",") if p]
    models = [load_model(p) for p in paths]
    named = dict(zip(_method_names(paths, models), models))
    train_ids, test_ids = split_ids(data)
    ids = {"test": test_ids, "train": train_ids, "all": list(data.corpus.cascades)}[args.split]
    cfg = ExperimentConfig(fractions=args.fractions, groups=args.groups, per_group=args.per_group or None,
                           horizon=args.horizon, delta_T=args.delta_t, mode=args.mode, patience=args.patience,
                           seed=args.seed, threads=args.threads, max_duration=args.max_duration,
                           process_fraction=args.process_frac, checkpoints=args.checkpoints, message_ids=ids)
    rows = []
    for exp in args.experiment:
        if exp == "size":
            rows += EXPERIMENTS[exp](data, named, cfg, train_ids=train_ids)
        else:
            rows += EXPERIMENTS[exp](data, named, cfg)
    write_csv(args.out, rows)
    summary_path = Path(args.out).with_suffix(".summary.json")
    _write_json(summary_path, {"config": {k: v for k, v in vars(args).items() if k != "func"},
                               "results": summarize(rows)})
    for r in rows:
        if r.checkpoint is None:
            print(f"{r.experiment:7s} >={r.group:<5d} p={r.fraction:<5g} {r.method:10s} "
                  f"n={r.n_cascades:<3d} {r.value:.4f} {r.flag}")
    print(f"wrote {args.out} and {summary_path}")


def _model_tables(paths: Sequence[str]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for p in paths:
        m = load_model(p)
        if isinstance(m, TrainedModel):
            d = m.to_dict()
            out[Path(p).stem] = {
                "candidate_accuracy": m.provenance.get("candidate_accuracy"),
                "chosen_classifier": m.classifier.kind,
                "selected_features": d["selected_names"],
                "feature_weights": m.provenance.get("weight_table"),
                "mechanism_measure": d["mechanism_measure"],
            }
        elif isinstance(m, LrcqModel):
            out[Path(p).stem] = {"cv_accuracy": m.provenance.get("cv_accuracy"), "params": m.params}
    return out


def cmd_report(args) -> None:
    if not Path(args.results).exists():
        raise FileNotFoundError(args.results)
    try:
        rows = read_csv(args.results)
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"{args.results}: {exc}") from exc
    res = summarize(rows)
    report: dict[str, Any] = {
        "contagion_state_accuracy": res.get("states", {}),
        "process_accuracy_series": res.get("process", {}),
        "size_precision_0.2": res.get("size", {}),
    }
    if args.models:
        report["models"] = _model_tables([p for p in args.models.split(",") if p])
    _write_json(args.out, report)
    print(f"wrote {args.out} from {len(rows)} result rows")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fscalecp", description="Cascade prediction from local spreading behaviour.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic dataset")
    s.add_argument("--nodes", type=int, default=1000)
    s.add_argument("--messages", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--m-per-node", type=int, default=3)
    s.add_argument("--reciprocity", type=float, default=0.3)
    s.add_argument("--topics", type=int, default=10)
    s.add_argument("--n-seeds", type=int, default=1, help="seed nodes per cascade")
    s.add_argument("--threshold", type=int, default=0,
                   help="use the deterministic rule |active parents| >= THRESHOLD instead of the logistic one")
    s.add_argument("--test-frac", type=float, default=0.3, help="share of cascades held out for evaluation")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    t = sub.add_parser("train", help="learn a spreading-behaviour model")
    t.add_argument("--data", required=True)
    t.add_argument("--variant", choices=("fscalecp",) + LRCQ_VARIANTS, default="fscalecp")
    t.add_argument("--kinds", type=lambda x: x.split(","), default=list(KINDS),
                   help="candidate classifiers, comma-separated")
    t.add_argument("--folds", type=int, default=10)
    t.add_argument("--sfbs-folds", type=int, default=None, help="folds inside feature selection (default --folds)")
    t.add_argument("--max-instances", type=int, default=None)
    t.add_argument("--hyper", default=None, help='JSON, e.g. {"rforest": {"n_trees": 20}}')
    t.add_argument("--all-cascades", action="store_true", help="ignore the held-out split")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--restart", type=float, default=0.15, help="random-walk restart probability")
    t.add_argument("--mu", type=float, default=1.0)
    t.add_argument("--a", type=float, default=0.5)
    t.add_argument("--b", type=float, default=0.5)
    t.add_argument("--lrcq2-decay", type=float, default=None, metavar="SECONDS",
                   help="weight pairwise influence by exp(-h / SECONDS) instead of raw h")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    m = sub.add_parser("simulate", help="grow one cascade from its observed prefix")
    m.add_argument("--data", required=True)
    m.add_argument("--model", required=True)
    m.add_argument("--cascade", required=True)
    m.add_argument("--observe-frac", type=float, default=0.1)
    m.add_argument("--delta-t", type=float, default=300.0)
    m.add_argument("--horizon", type=float, default=432000.0)
    m.add_argument("--mode", choices=MODES, default="deterministic")
    m.add_argument("--patience", type=int, default=3)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--trace", default=None, help="per-step trace (JSON lines)")
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_simulate)

    e = sub.add_parser("evaluate", help="run prediction experiments")
    e.add_argument("--data", required=True)
    e.add_argument("--models", required=True, help="comma-separated model files")
    e.add_argument("--experiment", type=lambda x: x.split(","), default=["states"],
                   help="comma-separated subset of states,process,size")
    e.add_argument("--fractions", type=_floats, default=FRACTIONS)
    e.add_argument("--groups", type=_ints, default=SIZE_GROUPS, help="minimum cascade sizes")
    e.add_argument("--per-group", type=int, default=30, help="cascades per group (0 = all)")
    e.add_argument("--split", choices=("test", "train", "all"), default="test")
    e.add_argument("--delta-t", type=float, default=300.0)
    e.add_argument("--horizon", type=float, default=432000.0)
    e.add_argument("--mode", choices=MODES, default="deterministic")
    e.add_argument("--patience", type=int, default=3)
    e.add_argument("--max-duration", type=float, default=172800.0, help="process experiment cascade filter")
    e.add_argument("--process-frac", type=float, default=0.1)
    e.add_argument("--checkpoints", type=_floats, default=CHECKPOINTS,
                   help="offsets in seconds after the observation boundary")
    e.add_argument("--threads", type=int, default=1)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_evaluate)

    r = sub.add_parser("report", help="tables from evaluation results")
    r.add_argument("--results", required=True)
    r.add_argument("--models", default=None, help="optional model files for the learning tables")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_report)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)   # exits with 2 on usage errors
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "evaluate":
        bad = set(args.experiment) - set(EXPERIMENTS)
        if bad:
            parser.error(f"unknown experiment(s) {sorted(bad)}; choose from {sorted(EXPERIMENTS)}")
        if args.threads < 1:
            parser.error("--threads must be >= 1")
    try:
        args.func(args)
    except FileNotFoundError as exc:
        print(f"error: missing file: {exc.filename or exc}", file=sys.stderr)
        return EXIT_MISSING
    except DimensionError as exc:
        print(f"error: dimension mismatch: {exc}", file=sys.stderr)
        return EXIT_DIMENSION
    except ValidationError as exc:
        print(f"error: invalid data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:   # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
