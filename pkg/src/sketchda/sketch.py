"""Frequent-directions sketch of a stream of feature rows.

The sketch keeps a ``2l x d`` buffer ``B``. Incoming rows fill zero rows
from the top; once every row is occupied the buffer is shrunk: its squared
singular values are reduced by the ``(l+1)``-th squared singular value,
which leaves at most ``l`` non-zero rows. Throughout the stream

    0 <= X^T X - B^T B <= delta * I,   delta <= ||X||_F^2 / (l + 1),

where ``delta`` is the accumulated shrinkage (``shrink_mass``).
"""

import numpy as np

from ._linalg import fix_row_signs
from .errors import ConfigurationError, NumericalError, StateError, StreamFormatError

# relative cutoff below which singular values count as zero
RANK_RTOL = 1e-12


class FrequentDirections:
    """Streaming low-rank summary of ``X^T X``.

    Parameters
    ----------
    sketch_size : int
        Number of retained directions ``l``. The buffer holds ``2 * l`` rows.
    dim : int
        Feature dimensionality ``d``.
    """

    def __init__(self, sketch_size, dim):
        if int(sketch_size) != sketch_size or sketch_size < 1:
            raise ConfigurationError(f"sketch_size must be a positive integer, got {sketch_size!r}")
        if int(dim) != dim or dim < 1:
            raise ConfigurationError(f"dim must be a positive integer, got {dim!r}")
        self.sketch_size = int(sketch_size)
        self.dim = int(dim)
        self.buffer = np.zeros((2 * self.sketch_size, self.dim))
        self.fill_count = 0
        self.last_basis = None
        self.frobenius_accum = 0.0
        self.shrink_mass = 0.0
        self.max_row_norm_sq = 0.0
        self.n_rows = 0
        self.n_shrinks = 0
        # stream index of the first row written since the last shrink
        self._segment_start = 0

    def __repr__(self):
        return (
            f"FrequentDirections(sketch_size={self.sketch_size}, dim={self.dim}, "
            f"n_rows={self.n_rows}, fill_count={self.fill_count})"
        )

    @property
    def nbytes(self):
        extra = 0 if self.last_basis is None else self.last_basis.nbytes
        return self.buffer.nbytes + extra

    def update(self, row):
        """Insert one row, shrinking when the buffer becomes full."""
        row = np.asarray(row, dtype=float)
        if row.shape != (self.dim,):
            raise StreamFormatError(
                f"row {self.n_rows}: expected {self.dim} features, got shape {row.shape}"
            )
        self.buffer[self.fill_count] = row
        self.fill_count += 1
        norm_sq = float(row @ row)
        self.frobenius_accum += norm_sq
        if norm_sq > self.max_row_norm_sq:
            self.max_row_norm_sq = norm_sq
        self.n_rows += 1
        if self.fill_count == self.buffer.shape[0]:
            self.shrink()
        return self

    def extend(self, rows):
        rows = np.asarray(rows, dtype=float)
        if rows.ndim != 2:
            raise StreamFormatError(f"expected a 2-D array of rows, got shape {rows.shape}")
        for row in rows:
            self.update(row)
        return self

    def shrink(self):
        """SVD the buffer and subtract the (l+1)-th squared singular value."""
        if not np.all(np.isfinite(self.buffer)):
            raise NumericalError(
                f"non-finite entries in sketch buffer (stream rows "
                f"{self._segment_start}..{self.n_rows - 1})"
            )
        try:
            _, sv, vt = np.linalg.svd(self.buffer, full_matrices=False)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                f"SVD failed on stream rows {self._segment_start}..{self.n_rows - 1}: {exc}"
            ) from exc

        ell = self.sketch_size
        sv_kept = np.where(sv > RANK_RTOL * sv[0], sv, 0.0)
        xi = sv_kept[ell] if sv_kept.size > ell else 0.0
        shrunk = np.sqrt(np.maximum(sv_kept**2 - xi**2, 0.0))
        # spectral norm of the Gram reduction caused by this call
        self.shrink_mass += float(np.max(sv**2 - shrunk**2)) if sv.size else 0.0

        vt = fix_row_signs(vt)
        n_keep = int(np.count_nonzero(shrunk))
        self.buffer[n_keep:] = 0.0
        np.multiply(shrunk[:n_keep, None], vt[:n_keep], out=self.buffer[:n_keep])
        self.fill_count = n_keep
        self.last_basis = vt
        self.n_shrinks += 1
        self._segment_start = self.n_rows
        return self

    def gram(self):
        """Current ``B^T B``."""
        occupied = self.buffer[: self.fill_count]
        return occupied.T @ occupied

    def finalize(self, reduced_dim=None):
        """Final shrink; return ``(B_plus, P)``.

        ``B_plus`` is the upper ``l`` rows of the shrunk buffer and ``P`` holds
        the first ``reduced_dim`` right singular vectors as columns. The sketch
        stays usable, so more rows may be streamed and ``finalize`` called again.
        """
        if self.n_rows == 0:
            raise StateError("cannot finalize a sketch that has seen no rows")
        k = default_reduced_dim(self.sketch_size, self.dim) if reduced_dim is None else reduced_dim
        if int(k) != k or not 1 <= k <= min(self.sketch_size, self.dim):
            raise ConfigurationError(
                f"reduced_dim must be in [1, {min(self.sketch_size, self.dim)}], got {reduced_dim!r}"
            )
        self.shrink()
        b_plus = self.buffer[: self.sketch_size].copy()
        basis = self.last_basis[: int(k)].T.copy()
        return b_plus, basis


def default_reduced_dim(sketch_size, dim):
    return min(sketch_size, dim)
