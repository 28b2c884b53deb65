"""Cross-view matching: gallery ranking, CMC curve and mAP."""

import csv
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

METRICS = ("euclidean", "cosine")
REPORTED_RANKS = (1, 5, 10, 20)


def pairwise_distances(query, gallery, metric="euclidean"):
    query = np.atleast_2d(np.asarray(query, dtype=float))
    gallery = np.atleast_2d(np.asarray(gallery, dtype=float))
    if metric == "euclidean":
        # explicit differences (not the |q|^2 - 2qg + |g|^2 expansion) keep
        # distances exact under a common translation; blocked to bound memory
        out = np.empty((len(query), len(gallery)))
        step = max(1, 2**22 // max(1, gallery.size))
        for start in range(0, len(query), step):
            diff = query[start : start + step, None, :] - gallery[None, :, :]
            out[start : start + step] = np.einsum("qgk,qgk->qg", diff, diff)
        return out
    if metric == "cosine":
        qn = np.linalg.norm(query, axis=1, keepdims=True)
        gn = np.linalg.norm(gallery, axis=1, keepdims=True)
        qn[qn == 0.0] = 1.0
        gn[gn == 0.0] = 1.0
        return 1.0 - (query / qn) @ (gallery / gn).T
    raise InputError(f"unknown metric {metric!r}; expected one of {METRICS}")


def rank_gallery(model, query, gallery, metric="euclidean"):
    """Gallery indices ordered by increasing distance to each query.

    ``model`` embeds both sides first; pass ``None`` to rank raw vectors.
    A single query vector gives a 1-D order, a query matrix one row per
    query. Equal distances keep gallery order.
    """
    gallery = np.asarray(gallery, dtype=float)
    query = np.asarray(query, dtype=float)
    if gallery.ndim != 2 or gallery.shape[0] == 0:
        raise InputError("gallery must be a non-empty 2-D array")
    if query.shape[-1] != gallery.shape[1] or query.ndim > 2:
        raise InputError(f"query shape {query.shape} does not match gallery {gallery.shape}")
    if metric not in METRICS:
        raise InputError(f"unknown metric {metric!r}; expected one of {METRICS}")
    single = query.ndim == 1
    if model is not None:
        query, gallery = model.embed(query), model.embed(gallery)
    dist = pairwise_distances(query, gallery, metric)
    order = np.argsort(dist, axis=1, kind="stable")
    return order[0] if single else order


def _match_rows(rank_lists, query_labels, gallery_labels, query_cameras, gallery_cameras):
    """Per query, the boolean relevance of its ranked gallery (after exclusion)."""
    rank_lists = np.atleast_2d(np.asarray(rank_lists))
    query_labels = np.asarray(query_labels)
    gallery_labels = np.asarray(gallery_labels)
    if rank_lists.shape != (len(query_labels), len(gallery_labels)):
        raise InputError(
            f"rank lists of shape {rank_lists.shape} for {len(query_labels)} queries "
            f"and {len(gallery_labels)} gallery items"
        )
    exclude = query_cameras is not None and gallery_cameras is not None
    if exclude:
        query_cameras = np.asarray(query_cameras)
        gallery_cameras = np.asarray(gallery_cameras)
    rows = []
    for q, order in enumerate(rank_lists):
        hits = gallery_labels[order] == query_labels[q]
        if exclude:
            keep = ~(hits & (gallery_cameras[order] == query_cameras[q]))
            hits = hits[keep]
        rows.append(hits)
    return rows


def _warn_skipped(n_skipped):
    if n_skipped:
        warnings.warn(
            f"{n_skipped} queries have no matching gallery identity and were skipped",
            RuntimeWarning,
            stacklevel=3,
        )


def compute_cmc(
    rank_lists, query_labels, gallery_labels, query_cameras=None, gallery_cameras=None
):
    """Cumulative matching characteristic over all queries with a true match.

    ``cmc[j]`` is the fraction of those queries whose first correct gallery
    item sits at rank ``<= j + 1``. Passing both camera arrays drops gallery
    items sharing the query's identity and camera.
    """
    rows = _match_rows(rank_lists, query_labels, gallery_labels, query_cameras, gallery_cameras)
    n_gallery = len(gallery_labels)
    first_hit = np.zeros(n_gallery, dtype=int)
    n_valid = 0
    for hits in rows:
        idx = np.flatnonzero(hits)
        if idx.size:
            first_hit[idx[0]] += 1
            n_valid += 1
    _warn_skipped(len(rows) - n_valid)
    if n_valid == 0:
        return np.zeros(n_gallery)
    return np.cumsum(first_hit) / n_valid


def average_precision(hits):
    """Mean of precision-at-p over the positions p of relevant items."""
    idx = np.flatnonzero(hits)
    if idx.size == 0:
        return None
    precisions = np.arange(1, idx.size + 1) / (idx + 1)
    return math.fsum(precisions.tolist()) / idx.size


def compute_map(
    rank_lists, query_labels, gallery_labels, query_cameras=None, gallery_cameras=None
):
    """Mean average precision over queries with at least one relevant item.

    Returns ``nan`` when no query has a match.
    """
    rows = _match_rows(rank_lists, query_labels, gallery_labels, query_cameras, gallery_cameras)
    aps = [ap for ap in map(average_precision, rows) if ap is not None]
    _warn_skipped(len(rows) - len(aps))
    if not aps:
        return float("nan")
    return math.fsum(aps) / len(aps)


@dataclass
class EvalReport:
    cmc: np.ndarray
    rank_k: dict
    map: float
    n_queries: int
    n_gallery: int
    n_valid_queries: int
    metric: str = "euclidean"
    warnings: list = field(default_factory=list)

    @property
    def valid(self):
        return self.n_valid_queries > 0

    @property
    def rank1(self):
        return float(self.cmc[0])

    def to_dict(self):
        return {
            "n_queries": self.n_queries,
            "n_gallery": self.n_gallery,
            "n_valid_queries": self.n_valid_queries,
            "metric": self.metric,
            "valid": self.valid,
            "map": self.map if self.valid else None,
            "rank_k": {str(k): v for k, v in self.rank_k.items()},
            "cmc": [float(v) for v in self.cmc],
            "warnings": list(self.warnings),
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    def write_cmc_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["rank", "rate"])
            for j, rate in enumerate(self.cmc, start=1):
                writer.writerow([j, repr(float(rate))])


def evaluate(
    model,
    query,
    query_labels,
    gallery,
    gallery_labels,
    metric="euclidean",
    query_cameras=None,
    gallery_cameras=None,
):
    """Rank the gallery for every query and summarize as an :class:`EvalReport`."""
    query = np.asarray(query, dtype=float)
    if query.ndim != 2 or len(query) != len(query_labels):
        raise InputError(f"query of shape {query.shape} for {len(query_labels)} labels")
    if len(gallery) != len(gallery_labels):
        raise InputError(f"{len(gallery)} gallery vectors for {len(gallery_labels)} labels")
    order = rank_gallery(model, query, gallery, metric)
    args = (order, query_labels, gallery_labels, query_cameras, gallery_cameras)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        cmc = compute_cmc(*args)
        mean_ap = compute_map(*args)
    rows = _match_rows(*args)
    n_valid = sum(bool(np.any(r)) for r in rows)
    notes = []
    if n_valid < len(rows):
        notes.append(f"{len(rows) - n_valid} queries have no matching gallery identity")
    if n_valid == 0:
        notes.append("query and gallery identities do not overlap; mAP is undefined")
    rank_k = {k: float(cmc[k - 1]) for k in REPORTED_RANKS if k <= len(cmc)}
    return EvalReport(
        cmc=cmc,
        rank_k=rank_k,
        map=mean_ap,
        n_queries=len(query),
        n_gallery=len(gallery_labels),
        n_valid_queries=n_valid,
        metric=metric,
        warnings=notes,
    )
