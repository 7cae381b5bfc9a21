"""Metrics and the three prediction experiments.

Every experiment seeds the engine from the first ``ceil(p * size)`` events of
a ground-truth cascade and compares the grown cascade with the truth:

* contagion states: node-level accuracy of the final state,
* process: accuracy of the state before each checkpoint time,
* size: 0.2-precision of the predicted final size.

Node-level accuracy is measured over the evaluation universe, the nodes
activated in either cascade plus every node either one ever made
susceptible. Results come out as flat rows (one per group x fraction x
method, plus checkpoint for the process series).
"""

from __future__ import annotations

import csv
import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

from .baselines import CGCPred
from .cascade import Cascade, CascadeState, observe_before
from .data import SocialData
from .graph import SocialGraph
from .propagation import SimConfig, run
from .synth import DAY

FRACTIONS = (0.05, 0.10, 0.15, 0.20)
SIZE_GROUPS = (200, 400, 600)
CHECKPOINTS = (0.0, 3600.0, 2 * 3600.0, 4 * 3600.0, 8 * 3600.0, 12 * 3600.0, DAY, 2 * DAY)
CSV_FIELDS = ("experiment", "group", "fraction", "method", "checkpoint", "n_cascades", "value", "flag")


@dataclass
class Metrics:
    precision: float
    recall: float
    f1: float
    accuracy: float
    flags: tuple[str, ...] = ()

    def as_tuple(self) -> tuple[float, float, float, float]:
        return self.precision, self.recall, self.f1, self.accuracy


def classification_metrics(y_true: Sequence[int], y_pred: Sequence[int]) -> Metrics:
    """Precision, recall, F1 and accuracy with +1 as the positive class.

    A metric whose denominator is zero is reported as 0 and named in ``flags``.
    """
    t = np.asarray(y_true)
    p = np.asarray(y_pred)
    if t.shape != p.shape:
        raise ValueError(f"length mismatch: {t.shape} vs {p.shape}")
    if not (np.isin(t, (-1, 1)).all() and np.isin(p, (-1, 1)).all()):
        raise ValueError("labels must be +1 / -1")
    tp = int(((p == 1) & (t == 1)).sum())
    fp = int(((p == 1) & (t == -1)).sum())
    fn = int(((p == -1) & (t == 1)).sum())
    flags = []
    prec = tp / (tp + fp) if tp + fp else 0.0
    if tp + fp == 0:
        flags.append("precision")
    rec = tp / (tp + fn) if tp + fn else 0.0
    if tp + fn == 0:
        flags.append("recall")
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    if prec + rec == 0:
        flags.append("f1")
    acc = float((t == p).mean()) if len(t) else 0.0
    if len(t) == 0:
        flags.append("accuracy")
    return Metrics(prec, rec, f1, acc, tuple(flags))


def evaluation_universe(g: SocialGraph, truth: Iterable[int], predicted: Iterable[int]) -> set[int]:
    active = set(truth) | set(predicted)
    out = set(active)
    for v in active:
        out.update(g.children(v).tolist())
    return out


def state_accuracy(g: SocialGraph, truth: Iterable[int], predicted: Iterable[int]) -> float:
    """Share of the evaluation universe on which the two activation states agree."""
    truth, predicted = set(truth), set(predicted)
    universe = evaluation_universe(g, truth, predicted)
    if not universe:
        return 1.0
    agree = sum((v in truth) == (v in predicted) for v in universe)
    return agree / len(universe)


def within_tolerance(predicted: float, true: float, tol: float = 0.2) -> bool:
    return abs(predicted - true) <= tol * true


def precision_at(predicted: Sequence[float], true: Sequence[float], tol: float = 0.2) -> float:
    """Fraction of size predictions within ``tol`` of the truth (0.2-precision by default)."""
    if len(predicted) != len(true):
        raise ValueError("length mismatch")
    if not len(true):
        return 0.0
    return sum(within_tolerance(a, b, tol) for a, b in zip(predicted, true)) / len(true)


def n_observed(size: int, fraction: float) -> int:
    if not 0 < fraction <= 1:
        raise ValueError("fraction must be in (0, 1]")
    # round first so that e.g. 0.1 * 30 does not ceil to 4
    return max(1, min(size, math.ceil(round(fraction * size, 9))))


def believable_prefix(cascade: Cascade, fraction: float) -> Cascade:
    return cascade.prefix(n_observed(len(cascade), fraction))


def truth_within(cascade: Cascade, origin: float, horizon: float) -> Cascade:
    return Cascade(cascade.message_id, tuple(e for e in cascade.events if e[1] <= origin + horizon))


def job_seed(root: int, *parts: Any) -> int:
    """Engine seed for one (cascade, fraction, method) job, independent of scheduling order."""
    words = [int(root)] + [zlib.crc32(repr(p).encode("utf-8")) for p in parts]
    return int(np.random.SeedSequence(words).generate_state(1)[0])


@dataclass
class ExperimentConfig:
    fractions: tuple[float, ...] = FRACTIONS
    groups: tuple[int, ...] = SIZE_GROUPS
    per_group: int | None = 30
    horizon: float = 5 * DAY
    delta_T: float = 300.0
    mode: str = "deterministic"
    patience: int = 3
    seed: int = 0
    threads: int = 1
    max_duration: float = 2 * DAY     # process experiment filter
    process_fraction: float = 0.10
    checkpoints: tuple[float, ...] = CHECKPOINTS
    message_ids: Sequence[str] | None = None


@dataclass
class Row:
    experiment: str
    group: int
    fraction: float
    method: str
    checkpoint: float | None
    n_cascades: int
    value: float
    flag: str = ""


def select_groups(data: SocialData, cfg: ExperimentConfig,
                  keep: Callable[[Cascade], bool] | None = None) -> dict[int, list[str]]:
    """Cascades of size at least each threshold, at most ``per_group`` of them (seeded sample)."""
    ids = sorted(cfg.message_ids if cfg.message_ids is not None else data.corpus.cascades)
    out = {}
    for thr in cfg.groups:
        pool = [mid for mid in ids if len(data.corpus.cascades[mid]) >= thr
                and (keep is None or keep(data.corpus.cascades[mid]))]
        if cfg.per_group is not None and len(pool) > cfg.per_group:
            rng = np.random.default_rng(job_seed(cfg.seed, "group", thr))
            pool = sorted(pool[i] for i in rng.choice(len(pool), size=cfg.per_group, replace=False))
        out[thr] = pool
    return out


def simulate(data: SocialData, model, mid: str, fraction: float, cfg: ExperimentConfig,
             method: str = "") -> tuple[Cascade, Cascade, CascadeState]:
    """(observed prefix, predicted cascade, observed state) for one job."""
    truth = data.corpus.cascades[mid]
    m = data.corpus.messages[mid]
    observed = believable_prefix(truth, fraction)
    state = CascadeState.from_events(data.graph, mid, observed.events)
    t_new = state.last_time()
    sim = SimConfig(cfg.delta_T, max(0.0, m.origin_time + cfg.horizon - t_new),
                    job_seed(cfg.seed, mid, fraction, method), cfg.mode, cfg.patience)
    res = run(data, state, model, sim, m)
    return observed, res.cascade, state


def _map(fn, jobs: list, threads: int) -> list:
    if threads <= 1:
        return [fn(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, jobs))


def _predictions(data: SocialData, models: Mapping[str, Any], ids: Iterable[str],
                 fractions: Iterable[float], cfg: ExperimentConfig) -> dict[tuple, tuple[Cascade, Cascade]]:
    jobs = sorted({(mid, p, name) for mid in ids for p in fractions for name in models})

    def work(job):
        mid, p, name = job
        observed, pred, _ = simulate(data, models[name], mid, p, cfg, name)
        return observed, pred

    return dict(zip(jobs, _map(work, jobs, cfg.threads)))


def contagion_states_experiment(data: SocialData, models: Mapping[str, Any],
                                cfg: ExperimentConfig | None = None) -> list[Row]:
    cfg = cfg or ExperimentConfig()
    groups = select_groups(data, cfg)
    ids = sorted({mid for pool in groups.values() for mid in pool})
    preds = _predictions(data, models, ids, cfg.fractions, cfg)
    rows = []
    for thr, pool in groups.items():
        for p in cfg.fractions:
            for name in models:
                if not pool:
                    rows.append(Row("states", thr, p, name, None, 0, 0.0, "empty"))
                    continue
                accs = []
                for mid in pool:
                    m = data.corpus.messages[mid]
                    truth = truth_within(data.corpus.cascades[mid], m.origin_time, cfg.horizon)
                    accs.append(state_accuracy(data.graph, truth.node_set(), preds[mid, p, name][1].node_set()))
                rows.append(Row("states", thr, p, name, None, len(pool), float(np.mean(accs))))
    return rows


def process_prediction_experiment(data: SocialData, models: Mapping[str, Any],
                                  cfg: ExperimentConfig | None = None) -> list[Row]:
    """Accuracy of the state before ``t_obs + c`` for every checkpoint offset ``c``.

    Only cascades whose whole span is at most ``max_duration`` take part.
    """
    cfg = cfg or ExperimentConfig()
    p = cfg.process_fraction
    groups = select_groups(data, cfg, keep=lambda c: c.events[-1][1] - c.events[0][1] <= cfg.max_duration)
    ids = sorted({mid for pool in groups.values() for mid in pool})
    preds = _predictions(data, models, ids, [p], cfg)
    g = data.graph
    rows = []
    for thr, pool in groups.items():
        for name in models:
            for c in cfg.checkpoints:
                if not pool:
                    rows.append(Row("process", thr, p, name, c, 0, 0.0, "empty"))
                    continue
                accs = []
                for mid in pool:
                    observed, pred = preds[mid, p, name]
                    t = observed.events[-1][1] + c
                    truth = observe_before(g, data.corpus.cascades[mid], t).cascade.node_set()
                    guess = observe_before(g, pred, t).cascade.node_set()
                    accs.append(state_accuracy(g, truth, guess))
                rows.append(Row("process", thr, p, name, c, len(pool), float(np.mean(accs))))
    return rows


def size_prediction_experiment(data: SocialData, models: Mapping[str, Any], cfg: ExperimentConfig | None = None,
                               cg: CGCPred | None = None, train_ids: Sequence[str] | None = None) -> list[Row]:
    """0.2-precision of final-size predictions.

    Engine-hosted models predict the size of the grown cascade. CG-CPred
    (fitted on ``train_ids`` unless given) needs two events, so it sees
    ``max(2, ceil(p * size))`` of them.
    """
    cfg = cfg or ExperimentConfig()
    groups = select_groups(data, cfg)
    ids = sorted({mid for pool in groups.values() for mid in pool})
    preds = _predictions(data, models, ids, cfg.fractions, cfg)
    if cg is None:
        cg = CGCPred().fit(data, cfg.fractions, train_ids)
    methods = list(models) + ["cg-cpred"]
    rows = []
    for thr, pool in groups.items():
        for p in cfg.fractions:
            for name in methods:
                if not pool:
                    rows.append(Row("size", thr, p, name, None, 0, 0.0, "empty"))
                    continue
                guesses, truths = [], []
                for mid in pool:
                    m = data.corpus.messages[mid]
                    truth = truth_within(data.corpus.cascades[mid], m.origin_time, cfg.horizon)
                    if name == "cg-cpred":
                        k = max(2, n_observed(len(truth), p))
                        state = CascadeState.from_events(data.graph, mid, truth.events[:k])
                        guesses.append(cg.predict(state, m))
                    else:
                        guesses.append(len(preds[mid, p, name][1]))
                    truths.append(len(truth))
                rows.append(Row("size", thr, p, name, None, len(pool), precision_at(guesses, truths)))
    return rows


EXPERIMENTS = {
    "states": contagion_states_experiment,
    "process": process_prediction_experiment,
    "size": size_prediction_experiment,
}


def write_csv(path, rows: Sequence[Row]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            d = asdict(r)
            d["checkpoint"] = "" if r.checkpoint is None else repr(float(r.checkpoint))
            d["fraction"] = repr(float(r.fraction))
            d["value"] = repr(float(r.value))
            w.writerow(d)


def read_csv(path) -> list[Row]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.DictReader(fh)
        missing = set(CSV_FIELDS) - set(r.fieldnames or ())
        if missing:
            raise ValueError(f"results file lacks columns {sorted(missing)}")
        for d in r:
            rows.append(Row(d["experiment"], int(d["group"]), float(d["fraction"]), d["method"],
                            float(d["checkpoint"]) if d["checkpoint"] else None,
                            int(d["n_cascades"]), float(d["value"]), d["flag"]))
    return rows


def summarize(rows: Sequence[Row]) -> dict[str, Any]:
    """Nested tables keyed experiment -> method -> group -> fraction (-> checkpoint)."""
    out: dict[str, Any] = {}
    for r in rows:
        cell = out.setdefault(r.experiment, {}).setdefault(r.method, {}).setdefault(f">={r.group}", {})
        key = f"{r.fraction:g}"
        if r.checkpoint is None:
            cell[key] = None if r.flag == "empty" else r.value
        else:
            cell.setdefault(key, {})[f"{r.checkpoint:g}"] = None if r.flag == "empty" else r.value
    return out
