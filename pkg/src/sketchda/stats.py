"""Running class means and the scatter matrices built from them."""

from dataclasses import dataclass

import numpy as np

from ._linalg import symmetrize
from .errors import ConfigurationError, StateError, StreamFormatError


class ClassStatistics:
    """One-pass per-class and population means and counts.

    Labels are arbitrary hashable identities (integers in practice); they
    need not be contiguous.
    """

    def __init__(self, dim):
        if int(dim) != dim or dim < 1:
            raise ConfigurationError(f"dim must be a positive integer, got {dim!r}")
        self.dim = int(dim)
        self.class_means = {}
        self.class_counts = {}
        self.population_mean = np.zeros(self.dim)
        self.population_count = 0

    def __repr__(self):
        return (
            f"ClassStatistics(dim={self.dim}, n_classes={self.n_classes}, "
            f"population_count={self.population_count})"
        )

    @property
    def n_classes(self):
        return len(self.class_counts)

    @property
    def labels(self):
        return sorted(self.class_counts)

    @property
    def nbytes(self):
        return self.population_mean.nbytes + sum(m.nbytes for m in self.class_means.values())

    def observe(self, x, label):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise StreamFormatError(
                f"sample {self.population_count}: expected {self.dim} features, got shape {x.shape}"
            )
        n = self.class_counts.get(label, 0)
        if n == 0:
            self.class_means[label] = x.copy()
        else:
            self.class_means[label] = (n * self.class_means[label] + x) / (n + 1)
        self.class_counts[label] = n + 1

        n0 = self.population_count
        self.population_mean = (n0 * self.population_mean + x) / (n0 + 1)
        self.population_count = n0 + 1
        return self

    def mean_matrix(self):
        """Class means stacked in sorted-label order, with matching counts."""
        labels = self.labels
        means = np.array([self.class_means[c] for c in labels]).reshape(len(labels), self.dim)
        counts = np.array([self.class_counts[c] for c in labels], dtype=float)
        return labels, means, counts


def between_scatter(stats):
    """Count-weighted scatter of the class means about the population mean."""
    if stats.population_count == 0:
        raise StateError("between-class scatter of empty statistics")
    _, dev, counts = stats.mean_matrix()
    dev -= stats.population_mean
    dev *= np.sqrt(counts / stats.population_count)[:, None]
    return symmetrize(dev.T @ dev)


@dataclass(frozen=True)
class ScatterSet:
    between: np.ndarray
    total_approx: np.ndarray
    within_approx: np.ndarray


def approx_scatters(stats, b_plus):
    """Between, sketched total and sketched within-class scatter.

    ``total_approx = B^T B / N - m0 m0^T``; ``within_approx = total_approx -
    between``. ``total_approx`` is re-formed as ``within_approx + between`` so
    the decomposition holds exactly on the stored arrays. The within-class
    estimate is left as is, even if slightly indefinite.
    """
    b_plus = np.asarray(b_plus, dtype=float)
    if b_plus.ndim != 2 or b_plus.shape[1] != stats.dim:
        raise ConfigurationError(
            f"sketch has shape {b_plus.shape}, statistics have dim {stats.dim}"
        )
    if stats.population_count == 0:
        raise StateError("scatter matrices of empty statistics")
    n0 = stats.population_count
    m0 = stats.population_mean
    total = b_plus.T @ b_plus
    total /= n0
    total -= np.outer(m0, m0)
    between = between_scatter(stats)
    total -= between
    within = symmetrize(total)
    del total
    return ScatterSet(between=between, total_approx=within + between, within_approx=within)
