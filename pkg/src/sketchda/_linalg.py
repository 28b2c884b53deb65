import numpy as np


def symmetrize(a):
    out = a + a.T
    out *= 0.5
    return out


def fix_row_signs(rows):
    """Flip each row so that its largest-magnitude entry is positive.

    Ties on magnitude resolve to the first index. Returns a new array.
    """
    rows = np.array(rows, dtype=float, copy=True)
    if rows.size == 0:
        return rows
    pivots = np.argmax(np.abs(rows), axis=1)
    signs = np.sign(rows[np.arange(rows.shape[0]), pivots])
    signs[signs == 0] = 1.0
    rows *= signs[:, None]
    return rows


def fix_column_signs(cols):
    return fix_row_signs(np.asarray(cols).T).T
