"""
Extremely randomized trees.

Every tree sees the full training set and grows breadth first: all open nodes
of a depth are split in one vectorized pass. At each node one threshold is
drawn uniformly between the node's min and max of each considered feature, and
the (feature, threshold) pair with the largest entropy reduction wins. Trees are
stored as flat node arrays; prediction walks all trees at once.
"""

import logging
import time
from typing import NamedTuple

import numpy as np
from pydantic import BaseModel as PydanticBase
from pydantic import ConfigDict, Field

from core.errors import ModelCorruptionError
from core.models import N_SUPERLAYERS
from core.services.classifiers.base import N_CLASSES, Classifier, TrainingMetadata
from core.services.executor import ordered_map

logger = logging.getLogger(__name__)

LEAF = -1

# Rows routed through the forest per vectorized pass
PREDICT_CHUNK_ROWS = 2048


class ErtHyperparams(PydanticBase):
    n_estimators: int = Field(default=300, ge=1)
    split_criterion: str = Field(default="entropy", pattern="^entropy$")
    features_per_split: int = Field(default=N_SUPERLAYERS, ge=1, le=N_SUPERLAYERS)
    min_samples_split: int = Field(default=2, ge=2)
    max_depth: int | None = Field(default=None, ge=1)
    seed: int = 0


class DecisionTree(PydanticBase):
    """Flat node arrays; node 0 is the root and children always follow their parent."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def validate_structure(self) -> None:
        n = self.n_nodes
        if n == 0:
            raise ModelCorruptionError("tree has no nodes")
        for name in ("threshold", "left", "right"):
            if getattr(self, name).shape != (n,):
                raise ModelCorruptionError(f"tree {name} array does not match {n} nodes")
        if self.counts.shape != (n, N_CLASSES):
            raise ModelCorruptionError(f"tree class counts must have shape ({n}, {N_CLASSES})")
        if np.any(self.counts < 0):
            raise ModelCorruptionError("negative class count")

        internal = self.feature != LEAF
        nodes = np.arange(n)
        if np.any((self.feature[internal] < 0) | (self.feature[internal] >= N_SUPERLAYERS)):
            raise ModelCorruptionError("split feature index out of range")
        for children in (self.left[internal], self.right[internal]):
            if np.any((children <= nodes[internal]) | (children >= n)):
                raise ModelCorruptionError("child node index out of range")
        if np.any(self.counts[~internal].sum(axis=1) < 1):
            raise ModelCorruptionError("leaf without training samples")

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for node in range(self.n_nodes):
            if self.feature[node] != LEAF:
                depths[self.left[node]] = depths[node] + 1
                depths[self.right[node]] = depths[node] + 1
        return int(depths.max())


def _xlogx(counts: np.ndarray) -> np.ndarray:
    # counts are whole numbers, so max(count, 1) gives 0 * log2(0) = 0
    return counts * np.log2(np.maximum(counts, 1))


class LevelSplit(NamedTuple):
    feature: np.ndarray
    threshold: np.ndarray
    splits: np.ndarray
    left_counts: np.ndarray
    row_left: np.ndarray


def _split_level(
    Xa: np.ndarray,
    valid: np.ndarray,
    starts: np.ndarray,
    node_counts: np.ndarray,
    hp: ErtHyperparams,
    rng: np.random.Generator,
) -> LevelSplit:
    """
    Draw and score one threshold per (node, feature) for every open node of a level.

    Rows of `Xa` are grouped by node, node j starting at starts[j].
    """
    sizes = node_counts.sum(axis=1)
    lows = np.minimum.reduceat(Xa, starts, axis=0)
    highs = np.maximum.reduceat(Xa, starts, axis=0)
    # thresholds stay below the max so both children receive rows
    thresholds = np.minimum(
        lows + rng.random(lows.shape) * (highs - lows), np.nextafter(highs, lows)
    )

    owner = np.repeat(np.arange(len(starts)), sizes)
    goes_left = Xa <= thresholds[owner]
    left_n = np.add.reduceat(goes_left, starts, axis=0, dtype=np.int64)
    left_valid = np.add.reduceat(goes_left & valid[:, None], starts, axis=0, dtype=np.int64)
    right_n = sizes[:, None] - left_n
    right_valid = node_counts[:, 1:] - left_valid

    # node size times child entropy: the best split has the smallest value
    weighted = (
        _xlogx(left_n)
        - _xlogx(left_valid)
        - _xlogx(left_n - left_valid)
        + _xlogx(right_n)
        - _xlogx(right_valid)
        - _xlogx(right_n - right_valid)
    )
    usable = (left_n > 0) & (right_n > 0)
    if hp.features_per_split < N_SUPERLAYERS:
        keys = np.where(highs > lows, rng.random(lows.shape), np.inf)
        usable &= np.argsort(np.argsort(keys, axis=1), axis=1) < hp.features_per_split

    nodes = np.arange(len(starts))
    best = np.argmin(np.where(usable, weighted, np.inf), axis=1)
    best_left_n = left_n[nodes, best]
    best_left_valid = left_valid[nodes, best]
    return LevelSplit(
        feature=best,
        threshold=thresholds[nodes, best],
        splits=usable[nodes, best],
        left_counts=np.stack([best_left_n - best_left_valid, best_left_valid], axis=1),
        row_left=goes_left[np.arange(len(Xa)), best[owner]],
    )


def build_tree(X: np.ndarray, y: np.ndarray, hp: ErtHyperparams, rng: np.random.Generator) -> DecisionTree:
    """Grow one tree breadth first, splitting every open node of a depth in one pass."""
    n_rows = len(y)
    valid = y == 1
    capacity = 2 * n_rows - 1
    feature = np.full(capacity, LEAF, dtype=np.int64)
    threshold = np.zeros(capacity, dtype=np.float64)
    left = np.full(capacity, LEAF, dtype=np.int64)
    right = np.full(capacity, LEAF, dtype=np.int64)
    counts = np.zeros((capacity, N_CLASSES), dtype=np.int64)
    counts[0] = (n_rows - np.count_nonzero(valid), np.count_nonzero(valid))
    n_nodes = 1

    # rows of nodes that may still split, sorted by node
    rows = np.arange(n_rows)
    row_node = np.zeros(n_rows, dtype=np.int64)
    depth = 0
    while len(rows) and (hp.max_depth is None or depth < hp.max_depth):
        starts = np.concatenate(([0], np.flatnonzero(np.diff(row_node)) + 1))
        level_nodes = row_node[starts]
        sizes = np.diff(np.append(starts, len(rows)))
        is_open = (counts[level_nodes].min(axis=1) > 0) & (sizes >= hp.min_samples_split)
        if not is_open.any():
            break
        keep = np.repeat(is_open, sizes)
        rows, row_node = rows[keep], row_node[keep]
        level_nodes = level_nodes[is_open]
        starts = np.concatenate(([0], np.cumsum(sizes[is_open])[:-1]))

        level = _split_level(X[rows], valid[rows], starts, counts[level_nodes], hp, rng)
        if not level.splits.any():
            break

        parents = level_nodes[level.splits]
        children = n_nodes + 2 * np.arange(len(parents))
        feature[parents] = level.feature[level.splits]
        threshold[parents] = level.threshold[level.splits]
        left[parents] = children
        right[parents] = children + 1
        counts[children] = level.left_counts[level.splits]
        counts[children + 1] = counts[parents] - counts[children]
        n_nodes += 2 * len(parents)

        # rows of nodes that did not split stay in their leaf
        row_child = left[row_node]
        moving = row_child != LEAF
        rows = rows[moving]
        row_node = row_child[moving] + ~level.row_left[moving]
        order = np.argsort(row_node, kind="stable")
        rows, row_node = rows[order], row_node[order]
        depth += 1

    return DecisionTree(
        feature=feature[:n_nodes],
        threshold=threshold[:n_nodes],
        left=left[:n_nodes],
        right=right[:n_nodes],
        counts=counts[:n_nodes],
    )


class ErtModel(Classifier):
    KIND = "ert"

    def __init__(
        self,
        trees: list[DecisionTree],
        hyperparams: ErtHyperparams | None = None,
        metadata: TrainingMetadata | None = None,
    ):
        super().__init__(hyperparams or ErtHyperparams(), metadata)
        if not trees:
            raise ModelCorruptionError("forest has no trees")
        for tree in trees:
            tree.validate_structure()
        self.trees = trees
        self._pack()

    def _pack(self) -> None:
        offsets = np.cumsum([0, *(t.n_nodes for t in self.trees)])
        self._roots = offsets[:-1]
        self._feature = np.concatenate([t.feature for t in self.trees])
        self._threshold = np.concatenate([t.threshold for t in self.trees])
        self._left = np.concatenate(
            [np.where(t.left == LEAF, LEAF, t.left + o) for t, o in zip(self.trees, offsets, strict=False)]
        )
        self._right = np.concatenate(
            [np.where(t.right == LEAF, LEAF, t.right + o) for t, o in zip(self.trees, offsets, strict=False)]
        )
        counts = np.concatenate([t.counts for t in self.trees]).astype(np.float64)
        totals = counts.sum(axis=1, keepdims=True)
        self._leaf_proba = np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)
        self._max_depth = max(t.depth() for t in self.trees)

    @property
    def n_nodes(self) -> int:
        return len(self._feature)

    def _predict_chunk(self, X: np.ndarray) -> np.ndarray:
        rows = np.arange(len(X))[:, None]
        node = np.broadcast_to(self._roots, (len(X), len(self._roots))).copy()
        for _ in range(self._max_depth):
            feat = self._feature[node]
            internal = feat != LEAF
            if not internal.any():
                break
            goes_left = X[rows, np.where(internal, feat, 0)] <= self._threshold[node]
            child = np.where(goes_left, self._left[node], self._right[node])
            node = np.where(internal, child, node)
        return self._leaf_proba[node].mean(axis=1)

    def _predict_proba(self, X: np.ndarray) -> np.ndarray:
        if len(X) <= PREDICT_CHUNK_ROWS:
            return self._predict_chunk(X)
        return np.concatenate(
            [
                self._predict_chunk(X[start : start + PREDICT_CHUNK_ROWS])
                for start in range(0, len(X), PREDICT_CHUNK_ROWS)
            ]
        )


def ert_predict(model: ErtModel, features) -> tuple[float, float]:
    return model.predict_one(features)


def ert_train(X: np.ndarray, y: np.ndarray, hp: ErtHyperparams, threads: int = 1) -> ErtModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(y) == 0:
        raise ValueError("cannot train on an empty dataset")

    started = time.perf_counter()
    logger.info(f"Training {hp.n_estimators} extremely randomized trees on {len(y)} rows")

    streams = np.random.SeedSequence(hp.seed).spawn(hp.n_estimators)
    trees = ordered_map(
        lambda stream: build_tree(X, y, hp, np.random.default_rng(stream)), streams, threads
    )

    model = ErtModel(trees, hp)
    model.metadata = TrainingMetadata(
        n_rows=len(y), train_accuracy=model.accuracy(X, y), n_nodes=model.n_nodes
    )
    logger.info(
        f"ERT trained: {model.n_nodes} nodes, depth {model._max_depth}, training accuracy "
        f"{model.metadata.train_accuracy:.4f} in {time.perf_counter() - started:.1f}s"
    )
    return model
