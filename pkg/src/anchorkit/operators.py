"""Catalog of maximal monotone operators with exact evaluation and resolvents.

Linear members (planar rotation, scaled identity, affine maps with monotone
linear part) are stored as a (matrix, shift) pair; the l1 subdifferential is
accessed only through its proximal map (coordinatewise soft thresholding).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, ConfigError, NotSingleValuedHere, SingularSystem

# Tolerances: kink detection for the l1 subdifferential, and floating-point
# slack on the symmetric part of exactly-skew matrices.
KINK_TOL = 1e-12
PSD_TOL = -1e-10

LINEAR_KINDS = ("rotation2d", "scaled_identity", "affine")


@dataclass(frozen=True)
class OperatorSpec:
    """A monotone operator usable through evaluation and/or exact resolvent.

    ``mu`` is the strong-monotonicity modulus (0 if merely monotone) and
    ``lipschitz`` is ``None`` for operators without a global Lipschitz
    constant (the l1 subdifferential).
    """

    kind: str
    dim: int
    mu: float = 0.0
    lipschitz: Optional[float] = None
    matrix: Optional[np.ndarray] = None
    shift: Optional[np.ndarray] = None
    weight: float = 0.0

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigError(f"operator dimension must be positive, got {self.dim}")
        if self.mu < 0:
            raise ConfigError(f"strong-monotonicity modulus must be nonnegative, got {self.mu}")
        if self.matrix is not None:
            self.matrix.setflags(write=False)
        if self.shift is not None:
            self.shift.setflags(write=False)

    @property
    def is_linear(self) -> bool:
        return self.kind in LINEAR_KINDS


@dataclass(frozen=True)
class ResolventQuery:
    """Input point and step for a resolvent application."""

    y: np.ndarray
    h: float

    def __post_init__(self):
        if not self.h > 0:
            raise ConfigError(f"resolvent step must be positive, got {self.h}")
        if not np.all(np.isfinite(self.y)):
            raise ConfigError("resolvent input must be finite")


def rotation2d(scale: float = 1.0) -> OperatorSpec:
    """Planar rotation generator ``scale * [[0, 1], [-1, 0]]``.

    ``scale=1`` is the unit instance; ``rotation2d(2 * pi * xi)`` gives the
    frequency-``xi`` family.
    """
    m = np.array([[0.0, scale], [-scale, 0.0]])
    return OperatorSpec(kind="rotation2d", dim=2, mu=0.0, lipschitz=abs(scale),
                        matrix=m, shift=np.zeros(2))


def scaled_identity(mu: float, dim: int = 2) -> OperatorSpec:
    """The map ``x -> mu * x`` on R^dim, mu-strongly monotone."""
    if mu < 0:
        raise ConfigError(f"scale must be nonnegative, got {mu}")
    return OperatorSpec(kind="scaled_identity", dim=dim, mu=mu, lipschitz=mu,
                        matrix=mu * np.eye(dim), shift=np.zeros(dim))


def affine(matrix, shift=None) -> OperatorSpec:
    """Affine operator ``x -> M x + q`` with monotone linear part.

    Monotonicity requires ``M + M^T`` positive semidefinite; the smallest
    symmetric eigenvalue may dip to -1e-10 to admit exactly-skew matrices.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ConfigError(f"matrix must be square, got shape {m.shape}")
    dim = m.shape[0]
    q = np.zeros(dim) if shift is None else np.asarray(shift, dtype=float).copy()
    if q.shape != (dim,):
        raise DimensionMismatch(f"shift shape {q.shape} does not match matrix dim {dim}")
    sym_eigs = np.linalg.eigvalsh(0.5 * (m + m.T))
    if sym_eigs.min() < PSD_TOL:
        raise ConfigError(
            f"matrix is not monotone: min symmetric eigenvalue {sym_eigs.min():.3e}")
    mu = float(max(sym_eigs.min(), 0.0))
    return OperatorSpec(kind="affine", dim=dim, mu=mu,
                        lipschitz=float(np.linalg.norm(m, 2)), matrix=m.copy(), shift=q)


def zero_operator(dim: int = 2) -> OperatorSpec:
    return affine(np.zeros((dim, dim)))


def l1_subdifferential(weight: float, dim: int) -> OperatorSpec:
    """Subdifferential of ``weight * ||.||_1``; evaluable away from kinks only."""
    if weight < 0:
        raise ConfigError(f"l1 weight must be nonnegative, got {weight}")
    return OperatorSpec(kind="l1", dim=dim, mu=0.0, lipschitz=None, weight=weight)


def _check_dim(op: OperatorSpec, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != op.dim:
        raise DimensionMismatch(f"vector dim {x.shape[-1]} != operator dim {op.dim}")
    return x


def evaluate(op: OperatorSpec, x) -> np.ndarray:
    """Evaluate A(x).  Accepts batches along leading axes."""
    x = _check_dim(op, x)
    if op.is_linear:
        return x @ op.matrix.T + op.shift
    # l1: single-valued only away from the coordinate axes
    if np.min(np.abs(x)) < KINK_TOL:
        raise NotSingleValuedHere(
            "l1 subdifferential is set-valued at coordinates with |x_i| < 1e-12")
    return op.weight * np.sign(x)


def soft_threshold(y, threshold: float) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    return np.sign(y) * np.maximum(np.abs(y) - threshold, 0.0)


def make_resolvent(op: OperatorSpec, h: float) -> Callable[[np.ndarray], np.ndarray]:
    """Return x -> (I + h A)^{-1} x with any factorization done once.

    Problem sizes here are at most a few thousand, so linear kinds use a
    dense LU factorization with partial pivoting.
    """
    if not h > 0:
        raise ConfigError(f"resolvent step must be positive, got {h}")
    if op.is_linear:
        system = np.eye(op.dim) + h * op.matrix
        try:
            lu, piv = scipy.linalg.lu_factor(system)
        except scipy.linalg.LinAlgError as exc:  # pragma: no cover - defensive
            raise SingularSystem(f"resolvent system factorization failed: {exc}")
        if not np.all(np.isfinite(lu)):  # pragma: no cover - defensive
            raise SingularSystem("resolvent system factorization produced non-finite factors")
        offset = h * op.shift

        def apply_linear(y):
            y = _check_dim(op, y)
            return scipy.linalg.lu_solve((lu, piv), (y - offset).T).T

        return apply_linear

    threshold = h * op.weight

    def apply_prox(y):
        y = _check_dim(op, y)
        return soft_threshold(y, threshold)

    return apply_prox


def resolvent(op: OperatorSpec, query: ResolventQuery) -> np.ndarray:
    """Solve x + h u = y for the unique x with u in A(x)."""
    y = _check_dim(op, query.y)
    return make_resolvent(op, query.h)(y)


def reflected_resolvent(op: OperatorSpec, y, h: float) -> np.ndarray:
    """2 J_{hA} - I, nonexpansive for maximal monotone A."""
    y = np.asarray(y, dtype=float)
    return 2.0 * resolvent(op, ResolventQuery(y=y, h=h)) - y


def yosida(op: OperatorSpec, lam: float, x) -> np.ndarray:
    """(1/lam)(x - J_{lam A} x): a (1/lam)-Lipschitz monotone surrogate of A."""
    if not lam > 0:
        raise ConfigError(f"regularization parameter must be positive, got {lam}")
    x = np.asarray(x, dtype=float)
    return (x - resolvent(op, ResolventQuery(y=x, h=lam))) / lam


def selection_residual(y_prev, x, h: float) -> np.ndarray:
    """(y_prev - x) / h; lies in A(x) whenever x = J_{hA}(y_prev)."""
    y_prev = np.asarray(y_prev, dtype=float)
    x = np.asarray(x, dtype=float)
    if y_prev.shape != x.shape:
        raise DimensionMismatch(f"shape mismatch: {y_prev.shape} vs {x.shape}")
    if not h > 0:
        raise ConfigError(f"step must be positive, got {h}")
    return (y_prev - x) / h
