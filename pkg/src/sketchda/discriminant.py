"""Discriminant projections from sketched scatter matrices."""

import struct
from dataclasses import dataclass

import numpy as np

from ._linalg import fix_column_signs, symmetrize
from .errors import ConfigurationError, InputError, SingularityError, StateError, StreamFormatError
from .sketch import FrequentDirections
from .stats import ClassStatistics, approx_scatters

MODEL_MAGIC = b"SODA"
MODEL_VERSION = 1
_HEADER = struct.Struct("<4sHIIId")

# smallest admissible eigenvalue of the regularized within scatter, relative to its norm
DEFINITE_RTOL = 1e-12
RIDGE_SCALE = 1e-6


def reduce_scatters(scatters, basis):
    """Congruence of the between and sketched within scatters by ``basis``."""
    basis = np.asarray(basis, dtype=float)
    d = scatters.between.shape[0]
    if basis.ndim != 2 or basis.shape[0] != d or basis.shape[1] > d:
        raise ConfigurationError(f"basis of shape {basis.shape} does not fit scatters of dim {d}")
    between = symmetrize(basis.T @ scatters.between @ basis)
    within = symmetrize(basis.T @ scatters.within_approx @ basis)
    return between, within


def default_ridge(within, between=None, shrink_per_sample=0.0):
    """Ridge added to the within-class scatter before solving.

    ``shrink_per_sample`` is the sketch's accumulated shrinkage divided by the
    sample count. The sketched within scatter underestimates the exact one by
    at most that amount in every direction, so adding it restores
    ``within + ridge * I >= exact within``. A further trace-scaled term of
    relative size 1e-6 keeps the matrix strictly definite.
    """
    within = np.asarray(within, dtype=float)
    k = within.shape[0]
    scale = float(np.trace(within)) + k * shrink_per_sample
    if scale <= 0.0 and between is not None:
        scale = float(np.trace(between))
    if scale <= 0.0:
        scale = float(k)
    return shrink_per_sample + RIDGE_SCALE * scale / k


def _check_components(n_components, k):
    if int(n_components) != n_components or not 1 <= n_components <= k:
        raise ConfigurationError(f"n_components must be in [1, {k}], got {n_components!r}")
    return int(n_components)


def solve_discriminant(between, within, ridge, n_components):
    """Top generalized eigenpairs of ``between w = lam (within + ridge I) w``.

    Solved by whitening with the inverse square root of the regularized
    within scatter. Columns of ``W`` satisfy ``w^T (within + ridge I) w = 1``
    and have their largest-magnitude entry positive. Eigenvalues come back in
    nonincreasing order, ties kept in eigensolver order.
    """
    between = np.asarray(between, dtype=float)
    within = np.asarray(within, dtype=float)
    k = between.shape[0]
    if between.shape != (k, k) or within.shape != (k, k):
        raise ConfigurationError(f"scatter shapes differ: {between.shape} vs {within.shape}")
    if ridge < 0:
        raise ConfigurationError(f"ridge must be nonnegative, got {ridge}")
    r = _check_components(n_components, k)

    reg = symmetrize(within)
    reg[np.diag_indices(k)] += ridge
    evals, evecs = np.linalg.eigh(reg)
    del reg
    top = max(abs(evals[-1]), abs(evals[0]))
    if evals[0] < DEFINITE_RTOL * top or top == 0.0:
        raise SingularityError(
            f"within scatter + ridge is not positive definite (smallest eigenvalue "
            f"{evals[0]:.3e}, largest {evals[-1]:.3e}); use a larger ridge"
        )
    inv_sqrt = (evecs / np.sqrt(evals)) @ evecs.T
    del evecs
    whitened = symmetrize(inv_sqrt @ symmetrize(between) @ inv_sqrt)
    lam, z = np.linalg.eigh(whitened)
    del whitened
    order = np.argsort(-lam, kind="stable")[:r]
    lam = np.maximum(lam[order], 0.0)
    transform = fix_column_signs(inv_sqrt @ z[:, order])
    return transform, lam


@dataclass(frozen=True, eq=False)
class DiscriminantModel:
    """Frozen projection ``x -> W^T P^T x``."""

    reduction: np.ndarray
    transform: np.ndarray
    eigenvalues: np.ndarray
    ridge: float

    def __post_init__(self):
        for name in ("reduction", "transform", "eigenvalues"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.reduction.shape[1] != self.transform.shape[0]:
            raise ConfigurationError("reduction and transform shapes do not chain")
        if self.eigenvalues.shape != (self.transform.shape[1],):
            raise ConfigurationError("one eigenvalue per component required")

    @property
    def dim(self):
        return self.reduction.shape[0]

    @property
    def reduced_dim(self):
        return self.reduction.shape[1]

    @property
    def n_components(self):
        return self.transform.shape[1]

    @property
    def projection(self):
        """Combined ``d x r`` matrix ``P W``."""
        return self.reduction @ self.transform

    def embed(self, x):
        """Project one vector (``(d,)``) or a batch of rows (``(n, d)``)."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.dim,) or x.ndim > 2:
            raise InputError(f"expected trailing dimension {self.dim}, got shape {x.shape}")
        return (x @ self.reduction) @ self.transform

    def to_bytes(self):
        head = _HEADER.pack(
            MODEL_MAGIC, MODEL_VERSION, self.dim, self.reduced_dim, self.n_components, float(self.ridge)
        )
        body = b"".join(
            np.asarray(a, dtype="<f8").tobytes(order="F")
            for a in (self.reduction, self.transform, self.eigenvalues)
        )
        return head + body

    @classmethod
    def from_bytes(cls, data):
        if len(data) < _HEADER.size:
            raise InputError("model file truncated")
        magic, version, d, k, r, ridge = _HEADER.unpack_from(data)
        if magic != MODEL_MAGIC:
            raise InputError(f"not a model file (magic {magic!r})")
        if version != MODEL_VERSION:
            raise InputError(f"unsupported model format version {version}")
        expected = _HEADER.size + 8 * (d * k + k * r + r)
        if len(data) != expected:
            raise InputError(f"model file has {len(data)} bytes, expected {expected}")
        flat = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
        reduction = flat[: d * k].reshape((d, k), order="F")
        transform = flat[d * k : d * k + k * r].reshape((k, r), order="F")
        eigenvalues = flat[d * k + k * r :]
        return cls(reduction, transform, eigenvalues, ridge)

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def default_components(reduced_dim, n_classes):
    return max(1, min(reduced_dim, n_classes - 1))


def fit_finalize(sketch, stats, reduced_dim=None, n_components=None, ridge=None):
    """Finalize the sketch and solve for the discriminant model."""
    if sketch.n_rows == 0 or stats.population_count == 0:
        raise StateError("no samples have been streamed")
    if sketch.n_rows != stats.population_count or sketch.dim != stats.dim:
        raise ConfigurationError(
            f"sketch ({sketch.n_rows} rows, dim {sketch.dim}) and statistics "
            f"({stats.population_count} samples, dim {stats.dim}) were not fed the same stream"
        )
    b_plus, basis = sketch.finalize(reduced_dim)
    scatters = approx_scatters(stats, b_plus)
    del b_plus
    between, within = reduce_scatters(scatters, basis)
    del scatters  # only the reduced k x k problem is needed from here on
    if ridge is None:
        ridge = default_ridge(within, between, sketch.shrink_mass / stats.population_count)
    if n_components is None:
        n_components = default_components(basis.shape[1], stats.n_classes)
    transform, eigenvalues = solve_discriminant(between, within, ridge, n_components)
    return DiscriminantModel(basis, transform, eigenvalues, float(ridge))


class OnlineDiscriminant:
    """Sketch plus class statistics, fed one labeled sample at a time.

    >>> import numpy as np
    >>> od = OnlineDiscriminant(sketch_size=2, dim=3)
    >>> od.observe(np.array([1.0, 0.0, 0.0]), 0).observe(np.array([0.0, 1.0, 0.0]), 1)
    OnlineDiscriminant(sketch_size=2, dim=3, n_samples=2, n_classes=2)
    """

    def __init__(self, sketch_size, dim, reduced_dim=None, n_components=None, ridge=None):
        self.sketch = FrequentDirections(sketch_size, dim)
        self.stats = ClassStatistics(dim)
        if reduced_dim is not None and not 1 <= reduced_dim <= min(sketch_size, dim):
            raise ConfigurationError(
                f"reduced_dim must be in [1, {min(sketch_size, dim)}], got {reduced_dim!r}"
            )
        if ridge is not None and ridge < 0:
            raise ConfigurationError(f"ridge must be nonnegative, got {ridge}")
        self.reduced_dim = reduced_dim
        self.n_components = n_components
        self.ridge = ridge

    def __repr__(self):
        return (
            f"OnlineDiscriminant(sketch_size={self.sketch.sketch_size}, dim={self.sketch.dim}, "
            f"n_samples={self.stats.population_count}, n_classes={self.stats.n_classes})"
        )

    def observe(self, x, label):
        x = np.asarray(x, dtype=float)
        # validate before touching either structure so they stay in lockstep
        if x.shape != (self.sketch.dim,):
            raise StreamFormatError(
                f"sample {self.stats.population_count}: expected {self.sketch.dim} "
                f"features, got shape {x.shape}"
            )
        self.sketch.update(x)
        self.stats.observe(x, label)
        return self

    def partial_fit(self, X, y):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or len(X) != len(y):
            raise InputError(f"X of shape {X.shape} does not match {len(y)} labels")
        for x, label in zip(X, y):
            self.observe(x, label)
        return self

    def finalize(self):
        return fit_finalize(self.sketch, self.stats, self.reduced_dim, self.n_components, self.ridge)

    @property
    def nbytes(self):
        return self.sketch.nbytes + self.stats.nbytes
