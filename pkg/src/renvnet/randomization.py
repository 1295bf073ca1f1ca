r"""Randomized skipping and randomized reflection of a transition matrix.

A transition matrix ``r`` is used as a candidate-generating matrix; the
candidate ``j`` is accepted with probability ``alpha[j]``.  On rejection
the walker either

* jumps on from the rejected state, again governed by ``r``
  (**skipping**, :func:`skip_modify`), or
* stays where it is for another slot (**reflection**, :func:`reflect_modify`).

Both modifications have stationary vector proportional to
``eta * alpha`` (:func:`modified_stationary`), for reflection provided
``r`` is reversible.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from . import _rng
from .chain import VALIDATION_TOL, _frozen, check_irreducible, validate_stochastic
from .errors import (AllRejecting, DimensionError, NotIrreducible, SingularSystem, ValidationError,
                     ZeroNormalizer)

Mode = Literal["skipping", "reflection"]
MODES = ("skipping", "reflection")

# condition number above which (I - r I_{1-alpha}) is treated as singular
_COND_LIMIT = 1e12


def validate_acceptance(alpha, dim: Optional[int] = None) -> np.ndarray:
    """Return a read-only acceptance vector; at least one entry must be positive."""
    alpha = np.asarray(alpha, dtype=float)
    if alpha.ndim != 1:
        raise DimensionError("acceptance vector must be one-dimensional")
    if dim is not None and alpha.size != dim:
        raise DimensionError(f"acceptance vector has length {alpha.size}, expected {dim}")
    if not np.all(np.isfinite(alpha)) or np.any(alpha < 0) or np.any(alpha > 1):
        raise ValidationError("acceptance probabilities must lie in [0, 1]")
    if not np.any(alpha > 0):
        raise AllRejecting("acceptance vector is identically zero; every candidate is rejected")
    return _frozen(alpha)


def taboo_set(alpha) -> tuple:
    """States that are never accepted, ``{j : alpha_j = 0}``."""
    return tuple(int(j) for j in np.flatnonzero(np.asarray(alpha) == 0))


@dataclass(frozen=True)
class ModifiedChain:
    """Transition matrix of a randomized modification together with its inputs."""

    kernel: np.ndarray
    mode: str
    taboo: tuple
    alpha: np.ndarray
    source: np.ndarray


@dataclass(frozen=True)
class PeskunVerdict:
    relation: Literal["less", "greater", "equal", "incomparable"]
    witness: Optional[tuple] = None


def skip_modify(r, alpha) -> ModifiedChain:
    r"""Randomized skipping.

    Computes ``r_alpha = (I - r I_{1-alpha})^{-1} r I_alpha`` by a single
    LU factorisation with the columns of ``r I_alpha`` as right-hand sides.
    Taboo states (``alpha_j = 0``) are kept in the index set as zero
    columns.

    Parameters
    ----------
    r : (n, n) array_like
        Irreducible transition matrix.
    alpha : (n,) array_like
        Acceptance probabilities, not all zero.

    Returns
    -------
    ModifiedChain
    """
    r = validate_stochastic(r)
    n = r.shape[0]
    alpha = validate_acceptance(alpha, n)
    dec = check_irreducible(r)
    if not dec.irreducible:
        raise NotIrreducible("skipping requires an irreducible candidate matrix", dec.closed_classes)
    if np.all(alpha == 1.0):
        kernel = r.copy()
    else:
        lhs = np.eye(n) - r * (1.0 - alpha)[None, :]
        rhs = r * alpha[None, :]
        if np.linalg.cond(lhs) > _COND_LIMIT:
            raise SingularSystem("I - r I_(1-alpha) is numerically singular")
        try:
            kernel = np.linalg.solve(lhs, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(str(exc)) from exc
        kernel[kernel < 0] = 0.0
        kernel[:, alpha == 0] = 0.0
        if np.max(np.abs(kernel.sum(axis=1) - 1.0)) > VALIDATION_TOL:
            raise SingularSystem("skipping kernel lost stochasticity; system too ill-conditioned")
    return ModifiedChain(_frozen(kernel), "skipping", taboo_set(alpha), alpha, r)


def skip_oracle(r, alpha, terms: int) -> np.ndarray:
    r"""Partial sum ``sum_{k < terms} (r I_{1-alpha})^k r I_alpha`` of the skipping series."""
    if terms < 1:
        raise ValueError("terms must be >= 1")
    r = np.asarray(r, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    reject = r * (1.0 - alpha)[None, :]
    accept = r * alpha[None, :]
    total = accept.copy()
    term = accept
    for _ in range(terms - 1):
        term = reject @ term
        total += term
    return total


@dataclass(frozen=True)
class EmpiricalRow:
    """Monte-Carlo estimate of one row of a transition matrix."""

    frequencies: np.ndarray
    counts: np.ndarray
    samples: int
    mean_steps: float

    @property
    def standard_errors(self) -> np.ndarray:
        p = self.frequencies
        return np.sqrt(p * (1.0 - p) / self.samples)


def skip_absorbing_oracle(r, alpha, start: int, seed: int, samples: int,
                          workers: int = 1, max_steps: int = 1_000_000) -> EmpiricalRow:
    """Estimate ``r_alpha[start, :]`` by running the auxiliary absorbing chain.

    Each sample walks under ``r`` from ``start``; the candidate is accepted
    with probability ``alpha`` of the candidate, and the walk is absorbed at
    the first accepted candidate.  Samples are grouped in fixed blocks, each
    with its own seeded substream, so the result does not depend on
    ``workers``.
    """
    r = validate_stochastic(r)
    n = r.shape[0]
    alpha = validate_acceptance(alpha, n)
    if not 0 <= start < n:
        raise ValueError(f"start state {start} out of range")
    cum = np.cumsum(r, axis=1)
    cum[:, -1] = 1.0

    def run_block(block, count):
        rng = _rng.substream(seed, block)
        cur = np.full(count, start, dtype=np.intp)
        active = np.arange(count)
        steps = np.zeros(count, dtype=np.int64)
        for _ in range(max_steps):
            if active.size == 0:
                break
            u = rng.random(active.size)
            nxt = (u[:, None] >= cum[cur[active]]).sum(axis=1)
            cur[active] = nxt
            steps[active] += 1
            accepted = rng.random(active.size) < alpha[nxt]
            active = active[~accepted]
        else:
            raise RuntimeError("absorbing chain did not terminate")
        return np.bincount(cur, minlength=n), steps.sum()

    results = _rng.map_blocks(run_block, samples, workers)
    counts = sum(c for c, _ in results)
    total_steps = sum(s for _, s in results)
    return EmpiricalRow(counts / samples, counts, samples, float(total_steps) / samples)


def reflect_modify(r, alpha) -> ModifiedChain:
    """Randomized reflection.

    Off-diagonal entries are ``r[i, j] * alpha[j]``; every rejected
    candidate leaves the walker at ``i``, so the diagonal takes the
    remaining mass ``1 - sum_{j != i} r[i, j] alpha[j]``.
    """
    r = validate_stochastic(r)
    n = r.shape[0]
    alpha = validate_acceptance(alpha, n)
    kernel = r * alpha[None, :]
    np.fill_diagonal(kernel, 0.0)
    np.fill_diagonal(kernel, 1.0 - kernel.sum(axis=1))
    return ModifiedChain(_frozen(kernel), "reflection", taboo_set(alpha), alpha, r)


def modify(r, alpha, mode: Mode) -> ModifiedChain:
    if mode == "skipping":
        return skip_modify(r, alpha)
    if mode == "reflection":
        return reflect_modify(r, alpha)
    raise ValueError(f"unknown rerouting mode {mode!r}")


def modified_stationary(eta, alpha) -> np.ndarray:
    """Stationary vector of the modified chain, ``eta * alpha / <eta, alpha>``.

    ``eta`` may be any invariant measure of the unmodified chain; the
    result is normalised either way.
    """
    eta = np.asarray(eta, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if eta.shape != alpha.shape:
        raise DimensionError("eta and alpha differ in length")
    weighted = eta * alpha
    c = weighted.sum()
    if not c > 0:
        raise ZeroNormalizer("<eta, alpha> = 0")
    return _frozen(weighted / c)


def peskun_compare(A, B, tol: float = 1e-12) -> PeskunVerdict:
    """Compare two kernels in the off-diagonal (Peskun) order.

    ``less`` means every off-diagonal entry of ``A`` is at most the
    corresponding entry of ``B`` and at least one is strictly smaller
    (by more than ``tol``).  Whether both kernels share a stationary
    vector is the caller's concern.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape or A.ndim != 2:
        raise DimensionError(f"shapes {A.shape} and {B.shape} are not comparable")
    off = ~np.eye(A.shape[0], dtype=bool)
    d = np.where(off, A - B, 0.0)
    a_above = np.argwhere(d > tol)
    a_below = np.argwhere(d < -tol)
    if a_above.size == 0 and a_below.size == 0:
        return PeskunVerdict("equal")
    if a_above.size == 0:
        return PeskunVerdict("less")
    if a_below.size == 0:
        return PeskunVerdict("greater")
    i, j = a_above[0]
    return PeskunVerdict("incomparable", (int(i), int(j)))
