"""Synthetic two-view identity data.

Each identity gets a Gaussian mean; view 2 of every identity is shifted by
one fixed offset vector shared by all identities. The first half of the
identities forms the training split (both views, shuffled into a stream),
the second half the query (view 1) and gallery (view 2) splits, so train
and test identities never overlap.
"""

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .formats import write_binary, write_csv


@dataclass(frozen=True)
class Split:
    X: np.ndarray
    labels: np.ndarray
    cameras: np.ndarray

    def __len__(self):
        return len(self.labels)


@dataclass(frozen=True)
class SyntheticData:
    train: Split
    query: Split
    gallery: Split
    class_means: np.ndarray
    view_offset: np.ndarray


def make_two_view(
    n_classes,
    per_class,
    dim,
    between_spread=4.0,
    within_spread=1.0,
    view_offset=2.0,
    seed=0,
    shuffle=True,
):
    """Sample train/query/gallery splits.

    ``between_spread``, ``within_spread`` and ``view_offset`` are per-coordinate
    standard deviations of the class means, the sample noise and the shared
    view-2 offset. ``per_class`` counts samples per identity and view.
    """
    if n_classes < 1 or per_class < 1 or dim < 1:
        raise ConfigurationError("n_classes, per_class and dim must be positive")
    if not between_spread > 0 or within_spread < 0 or view_offset < 0:
        raise ConfigurationError("between_spread must be positive, other spreads nonnegative")
    n_train = n_classes // 2
    if n_classes - n_train < 2:
        warnings.warn("fewer than 2 test identities; matching evaluation is degenerate", UserWarning)

    rng = np.random.default_rng(seed)
    means = rng.normal(0.0, between_spread, size=(n_classes, dim))
    offset = rng.normal(0.0, view_offset, size=dim)
    noise = rng.normal(0.0, 1.0, size=(2, n_classes, per_class, dim)) * within_spread
    views = means[None, :, None, :] + noise
    views[1] += offset

    def take(ids, view_list):
        if not ids:
            return Split(np.empty((0, dim)), np.empty(0, dtype=int), np.empty(0, dtype=int))
        X = np.concatenate([views[v, c] for v in view_list for c in ids])
        labels = np.repeat([c for v in view_list for c in ids], per_class)
        cams = np.repeat([v for v in view_list for _ in ids], per_class)
        return Split(X, labels.astype(int), cams.astype(int))

    train_ids = range(n_train)
    test_ids = range(n_train, n_classes)
    train = take(train_ids, (0, 1))
    if shuffle and len(train):
        perm = rng.permutation(len(train))
        train = Split(train.X[perm], train.labels[perm], train.cameras[perm])
    return SyntheticData(
        train=train,
        query=take(test_ids, (0,)),
        gallery=take(test_ids, (1,)),
        class_means=means,
        view_offset=offset,
    )


def write_splits(data, out_dir, fmt="csv"):
    """Write ``train``, ``query`` and ``gallery`` files; return their paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    writer, ext = {"csv": (write_csv, "csv"), "binary": (write_binary, "sodf")}[fmt]
    paths = {}
    for name in ("train", "query", "gallery"):
        split = getattr(data, name)
        path = out_dir / f"{name}.{ext}"
        writer(path, split.X, split.labels, split.cameras)
        paths[name] = path
    return paths
