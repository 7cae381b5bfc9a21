"""On-disk dataset layout and the in-memory bundle the algorithms share.

A dataset directory holds::

    graph.tsv        child<TAB>parent edge list
    cascades.jsonl   one activation event per line: {"m", "v", "t"}
    messages.jsonl   one message record per line
    profiles.jsonl   one user profile per line
    manifest.json    free-form generator / provenance parameters
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable

from .cascade import Cascade, Corpus, Message, ProfileTable, UserProfile, ValidationError
from .graph import SocialGraph, load_graph


@dataclass
class SocialData:
    graph: SocialGraph
    corpus: Corpus
    profiles: ProfileTable
    manifest: dict[str, Any]

    @property
    def n_topics(self) -> int:
        return self.profiles.n_topics

    @classmethod
    def build(cls, graph: SocialGraph, cascades: Iterable[Cascade], messages: Iterable[Message],
              profiles: Iterable[UserProfile], manifest: dict[str, Any] | None = None) -> "SocialData":
        messages = {m.message_id: m for m in messages}
        lengths = {len(m.topic) for m in messages.values()}
        if len(lengths) > 1:
            raise ValidationError(f"messages disagree on topic count: {sorted(lengths)}")
        k = lengths.pop() if lengths else 0
        corpus = Corpus(graph, list(cascades), messages)
        table = ProfileTable.build(graph.n, profiles, k, corpus)
        return cls(graph, corpus, table, dict(manifest or {}))


def split_ids(data: SocialData) -> tuple[list[str], list[str]]:
    """(train, test) message ids from the manifest's ``split``; both are all ids when absent."""
    split = data.manifest.get("split")
    everything = list(data.corpus.cascades)
    if not split:
        return everything, everything
    known = set(everything)
    train = [m for m in split.get("train", []) if m in known]
    test = [m for m in split.get("test", []) if m in known]
    return train or everything, test or everything


def _dumps(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def cascade_lines(cascade: Cascade, graph: SocialGraph) -> list[str]:
    return [_dumps({"m": cascade.message_id, "v": graph.ids[v], "t": t}) for v, t in cascade.events]


def read_cascades(path: Path, graph: SocialGraph) -> list[Cascade]:
    events: dict[str, list[tuple[int, float]]] = defaultdict(list)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                mid, ext, t = str(rec["m"]), str(rec["v"]), float(rec["t"])
            except (ValueError, KeyError, TypeError) as exc:
                raise ValidationError(f"{path.name} line {lineno}: {exc}") from exc
            if ext not in graph.index:
                raise ValidationError(f"{path.name} line {lineno}: unknown node {ext!r}")
            events[mid].append((graph.index[ext], t))
    return [Cascade.from_unsorted(mid, ev) for mid, ev in events.items()]


def write_cascades(path: Path, cascades: Iterable[Cascade], graph: SocialGraph) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for c in cascades:
            for line in cascade_lines(c, graph):
                fh.write(line + "\n")


def _read_jsonl(path: Path) -> list[dict[str, Any]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                try:
                    out.append(json.loads(line))
                except ValueError as exc:
                    raise ValidationError(f"{path.name} line {lineno}: {exc}") from exc
    return out


def message_record(m: Message) -> dict[str, Any]:
    return {"message_id": m.message_id, "content_length": m.content_length,
            "has_keyword": m.has_keyword, "topic": list(m.topic), "origin_time": m.origin_time}


def profile_record(p: UserProfile, graph: SocialGraph) -> dict[str, Any]:
    return {"node": graph.ids[p.node], "verified": p.verified,
            "account_created": p.account_created,
            "interest": list(p.interest) if p.interest is not None else None}


def load_dataset(directory: str | Path) -> SocialData:
    d = Path(directory)
    for name in ("graph.tsv", "cascades.jsonl", "messages.jsonl", "profiles.jsonl"):
        if not (d / name).exists():
            raise FileNotFoundError(d / name)
    with open(d / "graph.tsv", "rb") as fh:
        graph, _ = load_graph(fh)
    cascades = read_cascades(d / "cascades.jsonl", graph)
    try:
        messages = [Message(str(r["message_id"]), int(r["content_length"]), bool(r["has_keyword"]),
                            tuple(r["topic"]), float(r.get("origin_time", 0.0)))
                    for r in _read_jsonl(d / "messages.jsonl")]
        profiles = []
        for r in _read_jsonl(d / "profiles.jsonl"):
            ext = str(r["node"])
            if ext not in graph.index:
                raise ValidationError(f"profile for unknown node {ext!r}")
            interest = r.get("interest")
            profiles.append(UserProfile(graph.index[ext], bool(r["verified"]), float(r["account_created"]),
                                        tuple(interest) if interest is not None else None))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"bad record: {exc}") from exc
    manifest = {}
    if (d / "manifest.json").exists():
        manifest = json.loads((d / "manifest.json").read_text(encoding="utf-8"))
    return SocialData.build(graph, cascades, messages, profiles, manifest)


def save_dataset(data: SocialData, directory: str | Path) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    g = data.graph
    (d / "graph.tsv").write_text("".join(line + "\n" for line in g.edge_lines()), encoding="utf-8")
    write_cascades(d / "cascades.jsonl", data.corpus.cascades.values(), g)
    with open(d / "messages.jsonl", "w", encoding="utf-8") as fh:
        for m in data.corpus.messages.values():
            fh.write(_dumps(message_record(m)) + "\n")
    with open(d / "profiles.jsonl", "w", encoding="utf-8") as fh:
        for node in sorted(data.profiles.profiles):
            fh.write(_dumps(profile_record(data.profiles.profiles[node], g)) + "\n")
    (d / "manifest.json").write_text(json.dumps(data.manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
