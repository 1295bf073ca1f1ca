r"""Finite discrete-time Markov chain algebra.

Stochastic-matrix validation, communicating-class decomposition,
stationary vectors and detailed-balance checks.  Matrices are plain
``numpy`` arrays; validated copies are returned read-only.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DimensionError, NotIrreducible, RowSumError, SingularSystem, ValidationError

#: tolerance for row sums and probability-vector normalisation
VALIDATION_TOL = 1e-12
#: default tolerance for numerical comparisons
COMPARE_TOL = 1e-10


def _frozen(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


def validate_stochastic(P, tol=VALIDATION_TOL, what="matrix") -> np.ndarray:
    """Return a read-only float copy of ``P`` after checking it is row-stochastic.

    Rows that do not sum to one are rejected, never repaired.
    """
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] == 0:
        raise DimensionError(f"{what} must be a non-empty square matrix, got shape {P.shape}")
    if not np.all(np.isfinite(P)):
        raise ValidationError(f"{what} has non-finite entries")
    if np.any(P < 0) or np.any(P > 1):
        i, j = np.argwhere((P < 0) | (P > 1))[0]
        raise ValidationError(f"{what} entry ({i}, {j}) = {P[i, j]!r} outside [0, 1]")
    sums = P.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > tol)
    if bad.size:
        raise RowSumError(int(bad[0]), float(sums[bad[0]]), what)
    return _frozen(P)


def validate_probability_vector(x, tol=VALIDATION_TOL) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or np.any(x < 0) or abs(x.sum() - 1.0) > tol:
        raise ValidationError("not a probability vector")
    return _frozen(x)


@dataclass(frozen=True)
class ClassDecomposition:
    """Communicating classes of a transition graph.

    ``classes[c]`` is a sorted tuple of states and ``closed[c]`` tells
    whether no edge leaves class ``c``.
    """

    classes: tuple
    closed: tuple

    @property
    def irreducible(self) -> bool:
        return len(self.classes) == 1

    @property
    def closed_classes(self) -> tuple:
        return tuple(c for c, f in zip(self.classes, self.closed) if f)

    def class_of(self, state: int) -> tuple:
        for c in self.classes:
            if state in c:
                return c
        raise KeyError(state)


def communicating_classes(adjacency) -> ClassDecomposition:
    """Strongly connected components of a directed graph given by a boolean matrix."""
    A = np.asarray(adjacency, dtype=bool)
    n = A.shape[0]
    ncomp, labels = connected_components(csr_matrix(A), directed=True, connection="strong")
    classes = [tuple(int(s) for s in np.flatnonzero(labels == c)) for c in range(ncomp)]
    closed = []
    for members in classes:
        outside = np.ones(n, dtype=bool)
        outside[list(members)] = False
        closed.append(not A[np.ix_(list(members), outside)].any())
    # deterministic order: by smallest member
    order = sorted(range(ncomp), key=lambda c: classes[c][0])
    return ClassDecomposition(tuple(classes[c] for c in order), tuple(closed[c] for c in order))


def check_irreducible(P) -> ClassDecomposition:
    """Decompose the transition graph ``{(i, j): P[i, j] > 0}`` into communicating classes."""
    P = np.asarray(P, dtype=float)
    return communicating_classes(P > 0)


def _solve_normalised(A_T) -> np.ndarray:
    # A_T = (P - I)^T or Q^T; the balance equations sum to zero, so any one
    # of them may be swapped for the normalisation constraint
    n = A_T.shape[0]
    M = np.array(A_T, dtype=float)
    M[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        x = np.linalg.solve(M, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"stationary solve failed: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystem("stationary solve produced non-finite values")
    if np.any(x < -1e-9):
        raise SingularSystem(f"stationary solve produced negative mass {x.min():.3e}")
    x[x < 0] = 0.0
    return x / x.sum()


def stationary_distribution(P) -> np.ndarray:
    """Stationary distribution of a finite Markov chain.

    Parameters
    ----------
    P : (n, n) array_like
        Row-stochastic transition matrix with exactly one closed
        communicating class (transient states are allowed and receive
        zero mass).

    Returns
    -------
    pi : (n,) ndarray
        Probability vector with ``pi @ P == pi``.

    Raises
    ------
    NotIrreducible
        If the chain has more than one closed class.
    SingularSystem
        If the dense solve fails.
    """
    P = validate_stochastic(P)
    dec = check_irreducible(P)
    closed = dec.closed_classes
    if len(closed) > 1:
        raise NotIrreducible(f"{len(closed)} closed classes; stationary vector is not unique", closed)
    n = P.shape[0]
    pi = _solve_normalised((P - np.eye(n)).T)
    return _frozen(pi)


def generator_stationary(Q) -> np.ndarray:
    """Stationary vector ``theta`` of a finite CTMC generator, ``theta @ Q == 0``."""
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise DimensionError(f"generator must be square, got shape {Q.shape}")
    adj = Q > 0
    np.fill_diagonal(adj, False)
    dec = communicating_classes(adj)
    closed = dec.closed_classes
    if len(closed) > 1:
        raise NotIrreducible(f"{len(closed)} closed classes; stationary vector is not unique", closed)
    return _frozen(_solve_normalised(Q.T))


def check_reversible(P, pi, tol=COMPARE_TOL) -> bool:
    """True iff ``|pi_i P(i,j) - pi_j P(j,i)| <= tol`` for all ``i, j``."""
    P = np.asarray(P, dtype=float)
    pi = np.asarray(pi, dtype=float)
    if P.shape != (pi.size, pi.size):
        raise DimensionError(f"matrix shape {P.shape} does not match vector length {pi.size}")
    flow = pi[:, None] * P
    return bool(np.max(np.abs(flow - flow.T)) <= tol)


def invariant_residual(x, P) -> float:
    """``max |(x P - x)_j|``."""
    x = np.asarray(x, dtype=float)
    P = np.asarray(P, dtype=float)
    if P.shape != (x.size, x.size):
        raise DimensionError(f"matrix shape {P.shape} does not match vector length {x.size}")
    return float(np.max(np.abs(x @ P - x)))


def guarded_ratio(num, den):
    """Elementwise ``num / den`` with the convention ``0/0 = 0``.

    A nonzero numerator over a zero denominator is an error.
    """
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    zero = den == 0
    if np.any(zero & (num != 0)):
        raise ZeroDivisionError("nonzero numerator over zero denominator")
    out = np.divide(num, np.where(zero, 1.0, den))
    out = np.where(zero, 0.0, out)
    return out if out.ndim else float(out)
