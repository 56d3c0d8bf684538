"""JSON model files: hyperparameters, schema, every sampled tree, chain summary.

Trees are stored as flat node lists in breadth-first order.  Floats are
written with ``repr`` precision so a load/save cycle reproduces the file
byte for byte.
"""

from __future__ import annotations

import dataclasses
import json
from collections import deque

import numpy as np

from .core import BDTError, DecisionTree, Hyperparameters, Leaf, Split, SplitRule
from .ensemble import Ensemble

FORMAT_VERSION = 1


class ModelFormatError(BDTError):
    pass


def tree_to_nodes(tree: DecisionTree) -> list[dict]:
    """Breadth-first node list; node 0 is the root, ``parent`` is -1 there."""
    out = []
    queue = deque([(tree.root, -1)])
    while queue:
        node, parent = queue.popleft()
        i = len(out)
        if isinstance(node, Leaf):
            out.append({"parent": parent, "counts": list(node.counts)})
        else:
            rec = {"parent": parent, "feature": node.rule.feature, "threshold": float(node.rule.threshold)}
            out.append(rec)
            # children land after everything already queued
            base = i + len(queue) + 1
            rec["left"], rec["right"] = base, base + 1
            queue.append((node.left, i))
            queue.append((node.right, i))
    return out


def tree_from_nodes(nodes: list[dict], class_count: int) -> DecisionTree:
    if not nodes:
        raise ModelFormatError("tree has no nodes")

    def build(i, parent, depth):
        if not 0 <= i < len(nodes) or depth > len(nodes):
            raise ModelFormatError(f"bad node index {i}")
        rec = nodes[i]
        if rec.get("parent") != parent:
            raise ModelFormatError(f"node {i} names parent {rec.get('parent')}, expected {parent}")
        if "counts" in rec:
            counts = tuple(int(c) for c in rec["counts"])
            if len(counts) != class_count or min(counts) < 0:
                raise ModelFormatError(f"node {i} has bad counts {rec['counts']}")
            return Leaf(counts)
        rule = SplitRule(int(rec["feature"]), float(rec["threshold"]))
        return Split(rule, build(rec["left"], i, depth + 1), build(rec["right"], i, depth + 1))

    try:
        return DecisionTree(build(0, -1, 0), class_count)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed tree: {exc}") from None


def _hyper_to_dict(h: Hyperparameters | None):
    if h is None:
        return None
    d = dataclasses.asdict(h)
    d["move_probs"] = list(d["move_probs"])
    return d


def _hyper_from_dict(d) -> Hyperparameters | None:
    if d is None:
        return None
    known = {f.name for f in dataclasses.fields(Hyperparameters)}
    unknown = set(d) - known
    if unknown:
        raise ModelFormatError(f"unknown hyperparameters {sorted(unknown)}")
    d = dict(d)
    d["move_probs"] = tuple(d["move_probs"])
    return Hyperparameters(**d)


def ensemble_to_dict(ens: Ensemble) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "hyperparameters": _hyper_to_dict(ens.hyper),
        "alpha": float(ens.alpha),
        "class_count": ens.class_count,
        "class_names": list(ens.class_names) if ens.class_names is not None else None,
        "label_name": ens.label_name,
        "features": [
            {"name": name, "min": float(lo), "max": float(hi)}
            for name, (lo, hi) in zip(ens.feature_names, ens.feature_ranges)
        ],
        "chain": ens.chain,
        "trees": [tree_to_nodes(t) for t in ens.trees],
    }


def ensemble_from_dict(d: dict) -> Ensemble:
    if not isinstance(d, dict) or "format_version" not in d:
        raise ModelFormatError("not a model file")
    if d["format_version"] != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format_version {d['format_version']}, expected {FORMAT_VERSION}")
    try:
        C = int(d["class_count"])
        feats = d["features"]
        trees = [tree_from_nodes(nodes, C) for nodes in d["trees"]]
        ens = Ensemble(
            trees,
            C,
            tuple(f["name"] for f in feats),
            np.array([[f["min"], f["max"]] for f in feats], dtype=float).reshape(-1, 2),
            hyper=_hyper_from_dict(d["hyperparameters"]),
            alpha=float(d["alpha"]),
            label_name=d["label_name"],
            class_names=tuple(d["class_names"]) if d["class_names"] is not None else None,
            chain=d.get("chain") or {},
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model file: {exc!r}") from None
    for t in ens.trees:
        for _, s in t.splits():
            if not 0 <= s.rule.feature < ens.m:
                raise ModelFormatError(f"tree uses feature {s.rule.feature}, model has {ens.m}")
    return ens


def dumps(ens: Ensemble) -> str:
    return json.dumps(ensemble_to_dict(ens), indent=1, sort_keys=True, allow_nan=False) + "\n"


def save_model(ens: Ensemble, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(ens))


def load_model(path) -> Ensemble:
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except FileNotFoundError:
        raise ModelFormatError(f"no such model file: {path}") from None
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not valid JSON ({exc})") from None
    return ensemble_from_dict(d)
