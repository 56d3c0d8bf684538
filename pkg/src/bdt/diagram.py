"""Line-per-node text rendering of a tree and a parser for it.

Each splitting node gets one line::

    node01 X4 < 1847.05, then node02, otherwise alert(0.99)

Splits are numbered breadth first from ``node01``.  A terminal node is
written in place as ``label(p)`` with ``p`` the probability of the last
class (for two classes, the positive one); with more classes all
probabilities are listed, separated by ``/``.  A tree without splits is the
single line ``node01 label(p)``.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import BDTError, DecisionTree, Leaf, Split, SplitRule


class DiagramError(BDTError):
    pass


def _number(tree: DecisionTree) -> dict[int, int]:
    """Breadth-first index (from 1) of every split, keyed by node identity."""
    out = {}
    queue = deque([tree.root])
    while queue:
        node = queue.popleft()
        if isinstance(node, Split):
            out[id(node)] = len(out) + 1
            queue.append(node.left)
            queue.append(node.right)
    return out


def _leaf_text(probs: np.ndarray, label: str) -> str:
    if len(probs) == 2:
        return f"{label}({probs[1]:.2f})"
    return f"{label}({'/'.join(f'{p:.2f}' for p in probs)})"


def render_diagram(
    tree: DecisionTree,
    feature_names: Sequence[str],
    label: str = "alert",
    alpha: float = 1.0,
    digits: int | None = None,
) -> str:
    """Text diagram of ``tree``.

    Thresholds are printed with full ``repr`` precision unless ``digits``
    asks for fixed-point rounding; only the full form parses back to a tree
    that routes every input exactly as the original.
    """
    numbers = _number(tree)
    width = max(2, len(str(len(numbers))))
    C = tree.class_count

    def probs(leaf):
        c = np.asarray(leaf.counts, dtype=float)
        return (c + alpha) / (c.sum() + C * alpha)

    def ref(node):
        if isinstance(node, Leaf):
            return _leaf_text(probs(node), label)
        return f"node{numbers[id(node)]:0{width}d}"

    if isinstance(tree.root, Leaf):
        return f"node{1:0{width}d} {ref(tree.root)}\n"
    lines = []
    queue = deque([tree.root])
    while queue:
        node = queue.popleft()
        if isinstance(node, Leaf):
            continue
        t = node.rule.threshold
        thr = repr(float(t)) if digits is None else f"{t:.{digits}f}"
        lines.append(
            f"{ref(node)} {feature_names[node.rule.feature]} < {thr}, then {ref(node.left)}, otherwise {ref(node.right)}"
        )
        queue.append(node.left)
        queue.append(node.right)
    return "\n".join(lines) + "\n"


_SPLIT = re.compile(r"^node(\d+) (.+) < (\S+), then (\S+), otherwise (\S+)$")
_LONE = re.compile(r"^node(\d+) (\S+)$")
_LEAF = re.compile(r"^(.+)\(([0-9./]+)\)$")


@dataclass(frozen=True)
class ParsedLeaf:
    probs: np.ndarray


@dataclass(frozen=True)
class ParsedSplit:
    rule: SplitRule
    left: object
    right: object


@dataclass
class ParsedDiagram:
    """A tree read back from its diagram: split rules and leaf probabilities."""

    root: object
    class_count: int

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        out = np.empty((X.shape[0], self.class_count))
        for i, x in enumerate(X):
            node = self.root
            while isinstance(node, ParsedSplit):
                node = node.left if x[node.rule.feature] < node.rule.threshold else node.right
            out[i] = node.probs
        return out

    def structure_key(self) -> tuple:
        def key(node):
            if isinstance(node, ParsedLeaf):
                return ()
            return (node.rule.feature, key(node.left), key(node.right))

        return key(self.root)

    def thresholds(self) -> list[float]:
        out = []

        def go(node):
            if isinstance(node, ParsedSplit):
                out.append(node.rule.threshold)
                go(node.left)
                go(node.right)

        go(self.root)
        return out


def _parse_leaf(text: str, C: int, where: str) -> ParsedLeaf:
    m = _LEAF.match(text)
    if m is None:
        raise DiagramError(f"{where}: cannot read terminal {text!r}")
    try:
        vals = [float(v) for v in m.group(2).split("/")]
    except ValueError:
        raise DiagramError(f"{where}: bad probabilities in {text!r}") from None
    if C == 2 and len(vals) == 1:
        vals = [1.0 - vals[0], vals[0]]
    if len(vals) != C:
        raise DiagramError(f"{where}: expected {C} class probabilities in {text!r}")
    return ParsedLeaf(np.array(vals))


def parse_diagram(text: str, feature_names: Sequence[str], class_count: int = 2) -> ParsedDiagram:
    """Inverse of :func:`render_diagram` up to the printed precision."""
    index = {name: j for j, name in enumerate(feature_names)}
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DiagramError("empty diagram")
    if len(lines) == 1 and (m := _LONE.match(lines[0])) is not None:
        return ParsedDiagram(_parse_leaf(m.group(2), class_count, "line 1"), class_count)
    rows = {}
    for n, ln in enumerate(lines, start=1):
        m = _SPLIT.match(ln)
        if m is None:
            raise DiagramError(f"line {n}: cannot parse {ln!r}")
        num, name, thr, left, right = m.groups()
        if name not in index:
            raise DiagramError(f"line {n}: unknown feature {name!r}")
        if int(num) in rows:
            raise DiagramError(f"line {n}: node{num} defined twice")
        try:
            rule = SplitRule(index[name], float(thr))
        except ValueError:
            raise DiagramError(f"line {n}: bad threshold {thr!r}") from None
        rows[int(num)] = (rule, left, right, n)
    seen = set()

    def build(ref: str, where: str):
        if ref.startswith("node") and ref[4:].isdigit():
            num = int(ref[4:])
            if num not in rows:
                raise DiagramError(f"{where}: {ref} is never defined")
            if num in seen:
                raise DiagramError(f"{where}: {ref} is reached twice")
            seen.add(num)
            rule, left, right, n = rows[num]
            return ParsedSplit(rule, build(left, f"line {n}"), build(right, f"line {n}"))
        return _parse_leaf(ref, class_count, where)

    first = next(iter(rows))
    root = build(f"node{first}", "line 1")
    if len(seen) != len(rows):
        raise DiagramError("diagram has unreachable nodes")
    return ParsedDiagram(root, class_count)

