"""Closed-form ridge linear maps between source and target embeddings.

Fitting solves the normal equations (XᵀX + λL)β = XᵀY where X carries a
leading all-ones column, L is the identity with its top-left cell zeroed
(the intercept is never regularized), and one symmetric positive-definite
factorization is shared across all target dimensions. Explicit matrix
inversion is deliberately avoided.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import EmptyDesignError, FormatError, RankDeficiencyError
from .gold import RelationPair, filter_by_vocab
from .store import EmbeddingModel, _format_value, nearest_neighbors

FORWARD = "forward"
REVERSE = "reverse"


@dataclass
class ProjectionMatrix:
    """Affine map: row 0 of ``coeffs`` is the intercept, rows 1..d the
    linear block."""

    coeffs: np.ndarray          # (source_dim + 1) x target_dim, float64
    lam: float

    def __post_init__(self) -> None:
        self.coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if self.coeffs.ndim != 2 or self.coeffs.shape[0] < 2:
            raise ValueError("coefficient matrix must be (source_dim+1) x target_dim")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("coefficient matrix contains non-finite entries")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")

    @property
    def source_dim(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def target_dim(self) -> int:
        return self.coeffs.shape[1]

    @property
    def intercept(self) -> np.ndarray:
        return self.coeffs[0]

    @property
    def linear(self) -> np.ndarray:
        return self.coeffs[1:]


@dataclass
class DesignSystem:
    """Paired design/response matrices plus the pairs each row came from."""

    X: np.ndarray               # n x (source_dim + 1); column 0 is all ones
    Y: np.ndarray               # n x target_dim
    pair_ids: list[RelationPair]
    skipped: list[tuple[RelationPair, str]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.X.ndim != 2 or self.Y.ndim != 2 or len(self.X) != len(self.Y):
            raise ValueError("X and Y must be 2-D with matching row counts")
        if len(self.X) == 0:
            raise EmptyDesignError("design has no rows")
        if len(self.pair_ids) != len(self.X):
            raise ValueError("pair_ids must have one entry per design row")
        if not np.all(self.X[:, 0] == 1.0):
            raise ValueError("X column 0 must be all ones")

    @property
    def n(self) -> int:
        return len(self.X)


def assemble_design(
    pairs: list[RelationPair],
    model: EmbeddingModel,
    direction: str = FORWARD,
    normalize: bool = False,
) -> DesignSystem:
    """Build the regression system from in-vocabulary pairs.

    ``direction`` picks which member feeds X: ``forward`` maps source to
    target, ``reverse`` maps target to source. Duplicate pair instances
    yield duplicate rows. Out-of-vocabulary pairs are dropped and recorded
    in ``skipped``; if nothing survives, EmptyDesignError is raised.
    ``normalize`` unit-normalizes every vector entering the system (an
    ablation; the default uses raw model vectors).
    """
    if direction not in (FORWARD, REVERSE):
        raise ValueError(f"unknown direction {direction!r}")
    sl = filter_by_vocab(pairs, model)
    if not sl.pairs:
        raise EmptyDesignError(
            f"no in-vocabulary pairs out of {len(pairs)} supplied")

    def vec(token: str) -> np.ndarray:
        v = model.vector(token).astype(np.float64)
        if normalize:
            norm = np.linalg.norm(v)
            if norm > 0:
                v = v / norm
        return v

    rows_x = []
    rows_y = []
    for p in sl.pairs:
        src, tgt = (p.source, p.target) if direction == FORWARD else (p.target, p.source)
        rows_x.append(vec(src))
        rows_y.append(vec(tgt))
    X = np.column_stack([np.ones(len(rows_x)), np.array(rows_x)])
    Y = np.array(rows_y)
    return DesignSystem(X, Y, list(sl.pairs), list(sl.skipped))


def _solve_normal_equations(A: np.ndarray, B: np.ndarray, lam: float) -> np.ndarray:
    """Solve A β = B by one Cholesky factorization shared by all columns."""
    try:
        factor = cho_factor(A, lower=True)
    except LinAlgError:
        raise RankDeficiencyError(
            f"normal equations are singular at lambda={lam}; "
            "either supply more pairs or set lambda > 0") from None
    return cho_solve(factor, B)


def fit(design: DesignSystem, lam: float = 0.0, fit_intercept: bool = True) -> ProjectionMatrix:
    """Ridge solution of the design's normal equations.

    The intercept coefficient is never regularized. With
    ``fit_intercept=False`` the intercept row is constrained to zero and
    every coefficient is regularized (plain ridge through the origin).
    """
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    X = design.X.astype(np.float64, copy=False)
    Y = design.Y.astype(np.float64, copy=False)
    if fit_intercept:
        A = X.T @ X
        L = np.eye(X.shape[1])
        L[0, 0] = 0.0
        A += lam * L
        coeffs = _solve_normal_equations(A, X.T @ Y, lam)
    else:
        Xl = X[:, 1:]
        A = Xl.T @ Xl + lam * np.eye(Xl.shape[1])
        beta = _solve_normal_equations(A, Xl.T @ Y, lam)
        coeffs = np.vstack([np.zeros(Y.shape[1]), beta])
    return ProjectionMatrix(coeffs, float(lam))


def apply(proj: ProjectionMatrix, source_vec: np.ndarray) -> np.ndarray:
    """Map a source vector (or a batch of row vectors) to target space."""
    v = np.asarray(source_vec, dtype=np.float64)
    if v.shape[-1] != proj.source_dim:
        raise ValueError(
            f"source vector has dim {v.shape[-1]}, projection expects {proj.source_dim}")
    return v @ proj.linear + proj.intercept


@dataclass
class LOOReport:
    """Leave-one-out result. Accuracies are fractions in [0, 1] taken over
    the folds that fit successfully; failed folds (singular fold system)
    are counted, not averaged."""

    accuracy: dict[int, float]
    n_evaluated: int
    n_failed: int
    skipped: list[tuple[RelationPair, str]]


def loo_cross_validate(
    pairs: list[RelationPair],
    model: EmbeddingModel,
    lam: float = 1.0,
    ks: tuple[int, ...] = (1, 5, 10),
    direction: str = FORWARD,
    exclude_source: bool = False,
) -> LOOReport:
    """Hold out one pair instance at a time, fit on the rest, and score
    hit@k of the true target among the predicted vector's neighbors.

    Duplicate instances stay in training except the single held-out row.
    ``exclude_source`` removes the held-out source token from the ranking
    (default off: the source may legitimately appear among neighbors).
    """
    design = assemble_design(pairs, model, direction=direction)
    if design.n < 2:
        raise EmptyDesignError("leave-one-out needs at least 2 in-vocabulary pairs")
    X, Y = design.X, design.Y
    A_full = X.T @ X
    B_full = X.T @ Y
    L = np.eye(X.shape[1])
    L[0, 0] = 0.0
    hits = {k: 0 for k in ks}
    max_k = max(ks)
    n_evaluated = 0
    n_failed = 0
    for i, pair in enumerate(design.pair_ids):
        x, y = X[i], Y[i]
        A = A_full - np.outer(x, x) + lam * L
        try:
            beta = _solve_normal_equations(A, B_full - np.outer(x, y), lam)
        except RankDeficiencyError:
            n_failed += 1
            continue
        predicted = x @ beta
        src, tgt = (pair.source, pair.target) if direction == FORWARD \
            else (pair.target, pair.source)
        exclude = frozenset({src}) if exclude_source else frozenset()
        ranked = nearest_neighbors(model, predicted, max_k, exclude=exclude)
        tokens = [t for t, _ in ranked]
        for k in ks:
            if tgt in tokens[:k]:
                hits[k] += 1
        n_evaluated += 1
    acc = {k: (hits[k] / n_evaluated if n_evaluated else 0.0) for k in ks}
    return LOOReport(acc, n_evaluated, n_failed, list(design.skipped))


def save_projection(proj: ProjectionMatrix, path: str) -> None:
    """Write the coefficients as text: ``dim <d> lambda <λ>`` then one row
    per line, shortest round-trip decimals."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"dim {proj.target_dim} lambda {_format_value(proj.lam)}\n")
        for row in proj.coeffs:
            f.write(" ".join(_format_value(x) for x in row) + "\n")


def load_projection(path: str) -> ProjectionMatrix:
    """Read a projection written by :func:`save_projection`."""
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().split()
        if len(header) != 4 or header[0] != "dim" or header[2] != "lambda":
            raise FormatError("expected header 'dim <d> lambda <value>'",
                              path=str(path), line=1)
        try:
            dim = int(header[1])
            lam = float(header[3])
        except ValueError:
            raise FormatError("unparseable projection header",
                              path=str(path), line=1) from None
        rows = []
        for lineno, line in enumerate(f, start=2):
            if not line.strip():
                continue
            values = line.split()
            if len(values) != dim:
                raise FormatError(
                    f"expected {dim} coefficients, got {len(values)}",
                    path=str(path), line=lineno)
            rows.append([float(v) for v in values])
    if len(rows) < 2:
        raise FormatError("projection needs an intercept row and at least "
                          "one linear row", path=str(path))
    return ProjectionMatrix(np.array(rows, dtype=np.float64), lam)
