"""CART classifier used for guards: Gini impurity, binary threshold splits."""

import logging
from collections import Counter
from collections.abc import Callable, Sequence

import numpy as np

from genrl._core import bases
from genrl.errors import InvalidInputError

log = logging.getLogger(__name__)

MAX_DEPTH = 4

Label = tuple[int, int]


class TreeLeaf(bases.Model):
    label: Label


class TreeSplit(bases.Model):
    """`x[feature] <= threshold` goes left."""

    feature: int
    threshold: float
    left: "DecisionTree"
    right: "DecisionTree"


DecisionTree = TreeLeaf | TreeSplit

TreeSplit.model_rebuild()


def gini(labels: Sequence[Label]) -> float:
    n = len(labels)
    if n == 0:
        return 0.0
    counts = np.array(list(Counter(labels).values()), dtype=np.float64)
    return float(1.0 - np.sum((counts / n) ** 2))


def _majority(labels: Sequence[Label]) -> Label:
    counts = Counter(labels)
    best = max(counts.values())
    return min(lab for lab, c in counts.items() if c == best)


def _best_split(x: np.ndarray, y: list[Label]) -> tuple[int, float] | None:
    best: tuple[float, int, float] | None = None
    n = len(y)
    for feature in range(x.shape[1]):
        values = np.unique(x[:, feature])
        for lo, hi in zip(values[:-1], values[1:], strict=True):
            threshold = float((lo + hi) / 2)
            mask = x[:, feature] <= threshold
            left = [lab for lab, m in zip(y, mask, strict=True) if m]
            right = [lab for lab, m in zip(y, mask, strict=True) if not m]
            score = (len(left) * gini(left) + len(right) * gini(right)) / n
            if best is None or score < best[0]:
                best = (score, feature, threshold)
    if best is None:
        return None
    return best[1], best[2]


def _grow(x: np.ndarray, y: list[Label], depth: int, max_depth: int) -> DecisionTree:
    if len(set(y)) == 1 or depth >= max_depth:
        return TreeLeaf(label=_majority(y))
    split = _best_split(x, y)
    if split is None:
        return TreeLeaf(label=_majority(y))
    feature, threshold = split
    mask = x[:, feature] <= threshold
    return TreeSplit(
        feature=feature,
        threshold=threshold,
        left=_grow(x[mask], [lab for lab, m in zip(y, mask, strict=True) if m], depth + 1, max_depth),
        right=_grow(x[~mask], [lab for lab, m in zip(y, mask, strict=True) if not m], depth + 1, max_depth),
    )


def fit_tree(features, labels: Sequence[Label], max_depth: int = MAX_DEPTH) -> DecisionTree:
    """
    Grow a tree on `features` (shape `(N, d)`) and edge labels.

    Ties between splits go to the lowest feature, then the lowest threshold; ties between
    leaf labels go to the smallest label.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    y = [tuple(int(v) for v in lab) for lab in labels]
    if len(y) == 0 or x.shape[0] != len(y):
        raise InvalidInputError("A decision tree needs a non-empty, aligned dataset.")
    return _grow(x, y, 0, max_depth)


def predict(tree: DecisionTree, x) -> Label:
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    node = tree
    while isinstance(node, TreeSplit):
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node.label


def depth(tree: DecisionTree) -> int:
    if isinstance(tree, TreeLeaf):
        return 0
    return 1 + max(depth(tree.left), depth(tree.right))


def accuracy(tree: DecisionTree, features, labels: Sequence[Label]) -> float:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    hits = [predict(tree, row) == tuple(lab) for row, lab in zip(x, labels, strict=True)]
    return float(np.mean(hits)) if hits else 1.0


def to_expression(
    tree: DecisionTree,
    feature_names: Sequence[str] = ("i",),
    integer_features: bool = True,
    label_name: Callable[[Label], str] | None = None,
) -> str:
    """
    Render as nested conditionals, e.g. `i <= 4 ? 0->1 : 0->2`.

    With integer features, `x <= 4.5` is written `x <= 4`.
    """

    def name(lab: Label) -> str:
        return label_name(lab) if label_name else f"{lab[0]}->{lab[1]}"

    def feat(k: int) -> str:
        return feature_names[k] if k < len(feature_names) else f"x{k}"

    def render(node: DecisionTree, nested: bool) -> str:
        if isinstance(node, TreeLeaf):
            return name(node.label)
        if integer_features:
            bound = str(int(np.floor(node.threshold)))
        else:
            bound = repr(node.threshold)
        text = (
            f"{feat(node.feature)} <= {bound} ? "
            f"{render(node.left, True)} : {render(node.right, True)}"
        )
        return f"({text})" if nested else text

    return render(tree, False)
