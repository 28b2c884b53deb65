"""Batch Fisher discriminant analysis and numerical checks of the sketch bounds.

Everything here works on stored data and is meant as ground truth for the
streaming path, so it deliberately shares no solver code with
:mod:`sketchda.discriminant`: generalized eigenproblems go through
:func:`scipy.linalg.eigh` rather than explicit whitening.
"""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg

from ._linalg import fix_column_signs, symmetrize
from .discriminant import default_ridge
from .errors import ConfigurationError, NumericalError, SingularityError, StateError

IDENTITY_RTOL = 1e-10
SB_RANK_RTOL = 1e-10


@dataclass(frozen=True)
class BatchScatters:
    within: np.ndarray
    between: np.ndarray
    total: np.ndarray


def batch_scatters(X, y):
    """Exact within, between and total scatter of stored samples.

    The total scatter is computed directly from the population-centred data,
    and ``total == within + between`` is checked rather than assumed.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] == 0:
        raise StateError(f"need a non-empty 2-D sample matrix, got shape {X.shape}")
    if y.shape != (X.shape[0],):
        raise ConfigurationError(f"{y.shape} labels for {X.shape[0]} samples")
    n, d = X.shape
    m0 = X.mean(axis=0)
    within = np.zeros((d, d))
    between = np.zeros((d, d))
    for c in np.unique(y):
        Xc = X[y == c]
        mc = Xc.mean(axis=0)
        centred = Xc - mc
        within += centred.T @ centred / n
        between += len(Xc) / n * np.outer(mc - m0, mc - m0)
    centred = X - m0
    total = centred.T @ centred / n
    within, between, total = symmetrize(within), symmetrize(between), symmetrize(total)

    scale = max(np.linalg.norm(total), np.finfo(float).tiny)
    gap = np.linalg.norm(total - within - between)
    if gap > IDENTITY_RTOL * scale:
        raise NumericalError(f"total != within + between (relative gap {gap / scale:.2e})")
    return BatchScatters(within=within, between=between, total=total)


def _generalized_top(between, within, ridge, n_components):
    k = between.shape[0]
    if not 1 <= n_components <= k:
        raise ConfigurationError(f"n_components must be in [1, {k}], got {n_components}")
    reg = symmetrize(within) + ridge * np.eye(k)
    ev = np.linalg.eigvalsh(reg)
    top = max(abs(ev[0]), abs(ev[-1]))
    if top == 0.0 or ev[0] < 1e-12 * top:
        raise SingularityError(
            f"regularized within scatter not positive definite (min eigenvalue {ev[0]:.3e})"
        )
    try:
        lam, vecs = scipy.linalg.eigh(symmetrize(between), reg)
    except np.linalg.LinAlgError as exc:
        raise SingularityError(str(exc)) from exc
    order = np.argsort(-lam, kind="stable")[:n_components]
    return fix_column_signs(vecs[:, order]), np.maximum(lam[order], 0.0)


def batch_fda(scatters, ridge, n_components, basis=None):
    """Discriminant components of exact scatters.

    Same contract as :func:`sketchda.discriminant.solve_discriminant`. With
    ``basis`` the scatters are first reduced by ``basis^T S basis``.
    """
    if ridge < 0:
        raise ConfigurationError(f"ridge must be nonnegative, got {ridge}")
    between, within = scatters.between, scatters.within
    if basis is not None:
        basis = np.asarray(basis, dtype=float)
        between = basis.T @ between @ basis
        within = basis.T @ within @ basis
    return _generalized_top(between, within, ridge, n_components)


def fisher_score(W, numerator, denominator, ridge=0.0):
    """Trace ratio ``tr(W^T N W) / tr(W^T (D + ridge I) W)``."""
    W = np.asarray(W, dtype=float)
    if W.ndim == 1:
        W = W[:, None]
    num = float(np.trace(W.T @ numerator @ W))
    den = float(np.trace(W.T @ denominator @ W)) + ridge * float(np.sum(W * W))
    if not den > 0.0:
        raise NumericalError(f"nonpositive Fisher score denominator {den:.3e}")
    return num / den


def _finite(x):
    return None if isinstance(x, float) and not math.isfinite(x) else x


@dataclass(frozen=True)
class BoundReport:
    """Measured quantities for each bound; pass flags derive from these."""

    n_samples: int
    dim: int
    n_classes: int
    sketch_size: int
    k_used: int
    ridge: float
    frobenius_sq: float
    within_norm: float
    gap_psd_min_eig: float
    gap_spectral_norm: float
    gap_bound: float
    form_lower_excess: float
    form_upper_excess: float
    n_directions: int
    definite: bool
    s0: float
    rb: int
    M: float
    mu1: float
    mu2: float
    eigen_lower_lhs: float
    chain_sketched_w2: float
    chain_sketched_w1: float
    chain_exact_w1: float
    jf1_w2: float
    score_lower: float
    abs_tol: float = 1e-9
    rel_tol: float = 1e-9
    notes: list = field(default_factory=list)

    @property
    def gap_psd_pass(self):
        return self.gap_psd_min_eig >= -self.abs_tol * self.within_norm

    @property
    def gap_bound_pass(self):
        return self.gap_spectral_norm <= self.gap_bound + self.abs_tol

    @property
    def quadratic_form_pass(self):
        return self.form_lower_excess <= self.abs_tol and self.form_upper_excess <= self.abs_tol

    @property
    def scores_applicable(self):
        """Whether the Fisher-score bounds can be evaluated at all."""
        return self.definite and self.s0 > 0.0

    @property
    def two_class_applicable(self):
        return self.scores_applicable and self.n_classes == 2

    @property
    def eigen_order_pass(self):
        if not self.two_class_applicable:
            return None
        return self.mu2 >= self.mu1 * (1.0 - self.rel_tol)

    @property
    def eigen_lower_status(self):
        if not self.two_class_applicable:
            return "not_applicable"
        if self.eigen_lower_lhs <= 0.0:
            return "vacuous"
        ok = self.eigen_lower_lhs <= (1.0 / self.mu2) * (1.0 + self.rel_tol)
        return "pass" if ok else "fail"

    @property
    def trace_chain_pass(self):
        if not self.scores_applicable:
            return None
        return self.chain_sketched_w2 <= self.chain_exact_w1 * (1.0 + self.rel_tol)

    @property
    def trace_chain_middle_holds(self):
        # intermediate link of the chain; only guaranteed for a single component
        if not self.scores_applicable:
            return None
        return self.chain_sketched_w2 <= self.chain_sketched_w1 * (1.0 + self.rel_tol)

    @property
    def score_sandwich_pass(self):
        if not self.scores_applicable:
            return None
        lower_ok = self.score_lower <= self.jf1_w2 * (1.0 + self.rel_tol)
        upper_ok = self.jf1_w2 <= self.mu1 * (1.0 + self.rel_tol)
        return lower_ok and upper_ok

    @property
    def all_pass(self):
        checks = [
            self.gap_psd_pass,
            self.gap_bound_pass,
            self.quadratic_form_pass,
            self.eigen_order_pass,
            self.trace_chain_pass,
            self.score_sandwich_pass,
        ]
        if self.eigen_lower_status == "fail":
            return False
        return all(c is None or c for c in checks)

    def to_dict(self):
        out = {k: _finite(v) for k, v in asdict(self).items()}
        for flag in (
            "gap_psd_pass",
            "gap_bound_pass",
            "quadratic_form_pass",
            "two_class_applicable",
            "eigen_order_pass",
            "eigen_lower_status",
            "trace_chain_pass",
            "trace_chain_middle_holds",
            "score_sandwich_pass",
            "all_pass",
        ):
            value = getattr(self, flag)
            out[flag] = value if value is None or isinstance(value, str) else bool(value)
        return out

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)


def _sb_spectrum(between):
    sv = np.linalg.svd(between, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0.0, 0
    nonzero = sv[sv > SB_RANK_RTOL * sv[0]]
    return float(nonzero[-1]), int(nonzero.size)


def _sb_normalized(W, between):
    scale = float(np.trace(W.T @ between @ W))
    return W / math.sqrt(scale) if scale > 0.0 else W


def verify_bounds(
    X,
    y,
    scatters,
    sketch_size,
    shrink_mass=0.0,
    ridge=None,
    n_components=None,
    n_directions=200,
    seed=0,
):
    """Evaluate every within-scatter and Fisher-score bound on one stream.

    Parameters
    ----------
    X, y : stored samples and labels, in stream order.
    scatters : ScatterSet
        Output of the streaming path (``approx_scatters``) for the same stream.
    sketch_size : int
        The sketch's ``l``.
    shrink_mass : float
        Accumulated shrinkage of the sketch, used for the default shared ridge.
    ridge : float, optional
        Shared ridge for both within scatters. By default the same rule the
        model uses, applied in the full space.
    n_components : int, optional
        Columns of the compared solutions; defaults to ``min(d, C - 1)``.
    """
    X = np.asarray(X, dtype=float)
    exact = batch_scatters(X, y)
    n, d = X.shape
    n_classes = len(np.unique(y))
    ell = int(sketch_size)
    fro = float(np.sum(X * X))
    row_norm_max = float(np.max(np.sum(X * X, axis=1)))
    approx_within = scatters.within_approx
    between = scatters.between

    gap_eigs = np.linalg.eigvalsh(symmetrize(exact.within - approx_within))
    gap_bound = 2.0 * fro / (n * ell)

    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((n_directions, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    q_exact = np.einsum("ij,jk,ik->i", dirs, exact.within, dirs)
    q_approx = np.einsum("ij,jk,ik->i", dirs, approx_within, dirs)
    form_lower = float(np.max(q_approx - q_exact))
    form_upper = float(np.max(q_exact - q_approx - 2.0 * fro / (n * ell)))

    if ridge is None:
        ridge = default_ridge(approx_within, between, shrink_mass / n)
    k_used = n_components if n_components is not None else max(1, min(d, n_classes - 1))
    s0, rb = _sb_spectrum(between)
    notes = []

    nan = float("nan")
    mu1 = mu2 = lhs = t3a = t3b = t3c = jf = lower = nan
    definite = True
    try:
        W1, lam1 = _generalized_top(between, exact.within, ridge, k_used)
        W2, lam2 = _generalized_top(between, approx_within, ridge, k_used)
    except SingularityError as exc:
        definite = False
        notes.append(f"score bounds not evaluated: {exc}")
    else:
        mu1, mu2 = float(lam1[0]), float(lam2[0])
        if s0 > 0.0:
            lhs = 1.0 / mu1 - 2.0 * (s0 * rb) ** -0.5 * fro / (n * ell)
            reg_exact = exact.within + ridge * np.eye(d)
            reg_approx = approx_within + ridge * np.eye(d)
            W1 = _sb_normalized(W1, between)
            W2 = _sb_normalized(W2, between)
            t3a = float(np.trace(W2.T @ reg_approx @ W2))
            t3b = float(np.trace(W1.T @ reg_approx @ W1))
            t3c = float(np.trace(W1.T @ reg_exact @ W1))
            jf = fisher_score(W2, between, exact.within, ridge)
            lower = 1.0 / (1.0 / mu1 + (2.0 * k_used / (s0 * rb)) * row_norm_max / ell)
        else:
            notes.append("between-class scatter is zero; score bounds not applicable")

    if n_classes == 2 and definite and s0 > 0.0 and lhs <= 0.0:
        notes.append("two-class lower bound on 1/mu2 is vacuous")

    return BoundReport(
        n_samples=n,
        dim=d,
        n_classes=n_classes,
        sketch_size=ell,
        k_used=int(k_used),
        ridge=float(ridge),
        frobenius_sq=fro,
        within_norm=float(np.linalg.norm(exact.within, 2)),
        gap_psd_min_eig=float(gap_eigs[0]),
        gap_spectral_norm=float(np.max(np.abs(gap_eigs))),
        gap_bound=gap_bound,
        form_lower_excess=form_lower,
        form_upper_excess=form_upper,
        n_directions=int(n_directions),
        definite=definite,
        s0=s0,
        rb=rb,
        M=row_norm_max,
        mu1=mu1,
        mu2=mu2,
        eigen_lower_lhs=lhs,
        chain_sketched_w2=t3a,
        chain_sketched_w1=t3b,
        chain_exact_w1=t3c,
        jf1_w2=jf,
        score_lower=lower,
        notes=notes,
    )
