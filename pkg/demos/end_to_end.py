"""Generate a corpus, learn a spreading model, and grow held-out cascades from their first 10%.

Prints the classifier comparison, the selected features with their
mechanism shares, and per-cascade predicted vs true sizes for the learned
model and the LRC-Q1 baseline hosted in the same engine.

    python demos/end_to_end.py [n_nodes] [n_messages] [seed]
"""

import sys
import time

from fscalecp.baselines import lrcq_train
from fscalecp.data import split_ids
from fscalecp.evaluation import ExperimentConfig, select_groups, simulate, state_accuracy
from fscalecp.pipeline import LearnConfig, learn
from fscalecp.synth import size_summary, synth


def main(n_nodes=600, n_messages=120, seed=0):
    t0 = time.perf_counter()
    data = synth(n_nodes, n_messages, seed=seed)
    s = size_summary(data)
    print(f"{n_nodes} nodes, {data.graph.n_edges} edges, {n_messages} cascades: "
          f"median size {s['median']:g}, p90 {s['p90']:.0f}, max {s['max']}, {s['singletons']} never spread")

    train, test = split_ids(data)
    model = learn(data, LearnConfig(folds=5, max_instances=1500, message_ids=train,
                                    hyper={"rforest": {"n_trees": 15}}))
    prov = model.provenance
    print("\ncandidate classifiers (5-fold CV accuracy)")
    for kind, acc in prov["candidate_accuracy"].items():
        print(f"  {kind:8s} {acc:.3f}{'  <- chosen' if kind == model.classifier.kind else ''}")
    print("selected features")
    for row in prov["weight_table"]:
        print(f"  {row['feature']:13s} {row['mechanism']}  {row['weight']:.3f}")
    print("mechanism measure  " + "  ".join(f"{k} {v:.3f}" for k, v in zip(
        ("CSM", "TAM", "SCM", "EM"), model.mechanism)))

    base = lrcq_train("lrcq1", data, max_instances=1500, message_ids=train)
    cfg = ExperimentConfig(groups=(10,), per_group=8, message_ids=test)
    print("\nheld-out cascades, 10% observed: true size | learned model size, accuracy | lrcq1 size, accuracy")
    for mid in select_groups(data, cfg)[10]:
        truth = data.corpus.cascades[mid].node_set()
        line = [f"  {mid:5s} {len(truth):4d}"]
        for m in (model, base):
            observed, pred, _ = simulate(data, m, mid, 0.10, cfg)
            line.append(f"{len(pred):5d} {state_accuracy(data.graph, truth, pred.node_set()):.3f}")
        print(f"{line[0]} (observed {len(observed)}) | {line[1]} | {line[2]}")
    print(f"\ndone in {time.perf_counter() - t0:.0f}s")


if __name__ == "__main__":
    main(*(int(a) for a in sys.argv[1:4]))
