"""Capacity changes of a Jackson network by per-node factors ``gamma``.

A factor vector is turned into a control pair ``(alpha, beta)`` with
``alpha_j * beta == gamma_j``: routing is modified by the acceptance
vector ``alpha`` and the external input is scaled by ``beta``.  Nodes
with ``gamma_j == 0`` are blocked; their queue lengths stay frozen.
"""
from __future__ import annotations

import warnings
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .chain import COMPARE_TOL, _frozen, check_reversible, invariant_residual, validate_stochastic
from .errors import (AllBlockedWarning, DimensionError, HypothesisViolated, InvalidFrozenLaw, NotReversible,
                     ValidationError)
from .jackson import (GeneratorView, NetworkSpec, ProductFormDistribution, network_generator,
                      product_form, solve_traffic)
from .randomization import ModifiedChain, modify, taboo_set

MODES = ("skipping", "reflection", "user_supplied")

FrozenLaw = Union[Mapping, Callable, str, None]


def validate_gamma(gamma, J: Optional[int] = None) -> np.ndarray:
    gamma = np.asarray(gamma, dtype=float)
    if gamma.ndim != 1:
        raise DimensionError("capacity factors must be a vector")
    if J is not None and gamma.size != J:
        raise DimensionError(f"{gamma.size} capacity factors for {J} nodes")
    if not np.all(np.isfinite(gamma)) or np.any(gamma < 0):
        raise ValidationError("capacity factors must be finite and >= 0")
    return _frozen(gamma)


@dataclass(frozen=True)
class ControlPair:
    """Acceptance vector on ``{0..J}`` (``alpha[0] == 1``) and input factor ``beta >= 1``."""

    alpha: np.ndarray
    beta: float


def derive_controls(gamma) -> ControlPair:
    gamma = validate_gamma(gamma)
    top = float(gamma.max()) if gamma.size else 0.0
    if top <= 1.0:
        alpha, beta = gamma.copy(), 1.0
    else:
        alpha, beta = gamma / top, top
    if top == 0.0:
        warnings.warn("every node is blocked; only the exterior accepts", AllBlockedWarning, stacklevel=2)
    return ControlPair(_frozen(np.concatenate(([1.0], alpha))), beta)


@dataclass(frozen=True)
class NodePartition:
    """Blocked and working nodes, numbered ``1..J``."""

    blocked: tuple
    working: tuple


def partition_nodes(gamma) -> NodePartition:
    gamma = validate_gamma(gamma)
    blocked = tuple(j + 1 for j in np.flatnonzero(gamma == 0))
    working = tuple(j + 1 for j in np.flatnonzero(gamma > 0))
    return NodePartition(blocked, working)


def effective_arrival_rate(lam: float, beta: float, r_alpha) -> float:
    """Rate of external arrivals that actually enter: ``beta * lam * (1 - r_alpha[0, 0])``."""
    return beta * lam * (1.0 - float(np.asarray(r_alpha)[0, 0]))


def normalized_traffic(spec: NetworkSpec, eta=None) -> np.ndarray:
    eta = solve_traffic(spec) if eta is None else np.asarray(eta, dtype=float)
    return eta / eta.sum()


def require_reversible(spec: NetworkSpec, eta=None):
    """Raise :class:`NotReversible` unless the extended routing is reversible for ``eta``."""
    p = normalized_traffic(spec, eta)
    if not check_reversible(spec.routing, p, COMPARE_TOL):
        raise NotReversible("reflection requires routing reversible for the traffic solution")


def kernel_residual(kernel, alpha, eta) -> float:
    """Residual of ``alpha * eta`` (normalised) as an invariant measure of ``kernel``."""
    w = np.asarray(alpha, dtype=float) * np.asarray(eta, dtype=float)
    return invariant_residual(w / w.sum(), kernel)


def require_kernel(kernel, alpha, eta, tol=COMPARE_TOL) -> float:
    res = kernel_residual(kernel, alpha, eta)
    if res > tol:
        raise HypothesisViolated(
            f"supplied kernel does not leave alpha*eta invariant (residual {res:.3e} > {tol:g})")
    return res


def rerouting_kernel(spec: NetworkSpec, alpha, mode: str, kernel=None, eta=None) -> ModifiedChain:
    """Modified extended routing for one acceptance vector.

    ``user_supplied`` takes ``kernel`` as given after checking it is
    stochastic and leaves ``alpha * eta`` invariant.
    """
    if mode == "reflection":
        require_reversible(spec, eta)
    if mode in ("skipping", "reflection"):
        return modify(spec.routing, alpha, mode)
    if mode != "user_supplied":
        raise ValueError(f"unknown rerouting mode {mode!r}")
    if kernel is None:
        raise ValidationError("user_supplied mode needs a kernel")
    k = validate_stochastic(kernel, what="supplied kernel")
    if k.shape != spec.routing.shape:
        raise DimensionError(f"supplied kernel has shape {k.shape}, expected {spec.routing.shape}")
    require_kernel(k, alpha, solve_traffic(spec) if eta is None else eta)
    a = np.asarray(alpha, dtype=float)
    return ModifiedChain(k, "user_supplied", taboo_set(a), _frozen(a), spec.routing)


def arrival_rates(lam: float, beta: float, kernel) -> list:
    """External arrival rate into each node ``1..J`` under a modified routing."""
    base = beta * lam
    return [base * kernel[0, i] for i in range(1, kernel.shape[0])]


@dataclass(frozen=True)
class ModifiedNetwork:
    spec: NetworkSpec
    gamma: np.ndarray
    controls: ControlPair
    chain: ModifiedChain
    partition: NodePartition
    generator: GeneratorView

    @property
    def kernel(self) -> np.ndarray:
        return self.chain.kernel

    @property
    def effective_arrival_rate(self) -> float:
        return effective_arrival_rate(self.spec.total_rate, self.controls.beta, self.kernel)


def modified_network(spec: NetworkSpec, gamma, mode: str = "skipping", kernel=None) -> ModifiedNetwork:
    gamma = validate_gamma(gamma, spec.J)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AllBlockedWarning)
        controls = derive_controls(gamma)
    chain = rerouting_kernel(spec, controls.alpha, mode, kernel)
    gen = network_generator(arrival_rates(spec.total_rate, controls.beta, chain.kernel),
                            gamma, chain.kernel, spec.mu)
    return ModifiedNetwork(spec, gamma, controls, chain, partition_nodes(gamma), gen)


def modified_generator(spec: NetworkSpec, gamma, mode: str = "skipping", kernel=None) -> GeneratorView:
    """Queue-length generator after the capacity change ``gamma``.

    Arrivals enter node ``i`` at ``beta * lam * r_alpha(0, i)``; node ``j``
    serves at ``gamma_j * mu_j(n_j)`` and routes by ``r_alpha``.
    """
    return modified_network(spec, gamma, mode, kernel).generator


class StationaryFamily:
    """Product form on the working nodes times a frozen law on the blocked ones.

    ``phi`` is a mapping from blocked-coordinate tuples (in node order) to
    probabilities, a callable on such tuples, or ``"marginal"`` for the
    product of the unmodified marginals, which makes the family equal the
    original product form.
    """

    def __init__(self, base: ProductFormDistribution, partition: NodePartition, phi: FrozenLaw = None):
        self.base = base
        self.partition = partition
        self._blocked = [j - 1 for j in partition.blocked]
        self._working = [j - 1 for j in partition.working]
        self.phi = self._resolve(phi)

    def _resolve(self, phi):
        if not self._blocked:
            return lambda nb: 1.0
        if phi is None:
            raise InvalidFrozenLaw("blocked nodes present; a frozen law is required")
        if isinstance(phi, str):
            if phi != "marginal":
                raise InvalidFrozenLaw(f"unknown frozen law {phi!r}")
            blocked = self._blocked

            def marginal(nb):
                p = 1.0
                for j, v in zip(blocked, nb):
                    p *= self.base.marginal(j, v) if v >= 0 else 0.0
                return p
            return marginal
        if isinstance(phi, Mapping):
            table = {}
            for key, p in phi.items():
                key = (key,) if np.isscalar(key) else tuple(key)
                if len(key) != len(self._blocked):
                    raise InvalidFrozenLaw(f"frozen-law key {key} does not match {len(self._blocked)} blocked nodes")
                if not (p >= 0 and np.isfinite(p)):
                    raise InvalidFrozenLaw(f"frozen-law mass {p!r} is not a probability")
                table[tuple(int(x) for x in key)] = float(p)
            total = sum(table.values())
            if abs(total - 1.0) > 1e-12:
                raise InvalidFrozenLaw(f"frozen law sums to {total!r}, expected 1")
            return lambda nb: table.get(tuple(nb), 0.0)
        if callable(phi):
            return phi
        raise InvalidFrozenLaw(f"unsupported frozen law of type {type(phi).__name__}")

    def pmf(self, n) -> float:
        if len(n) != self.base.J:
            raise DimensionError(f"state has {len(n)} coordinates, network has {self.base.J} nodes")
        p = 1.0
        for j in self._working:
            if n[j] < 0:
                return 0.0
            p *= self.base.marginal(j, n[j])
        if self._blocked:
            p *= self.phi(tuple(n[j] for j in self._blocked))
        return p

    __call__ = pmf


def specific_frozen_law(base: ProductFormDistribution, partition: NodePartition) -> Callable:
    """Product of the unmodified marginals on the blocked nodes."""
    return StationaryFamily(base, partition, "marginal").phi


def stationary_family(spec: NetworkSpec, gamma, phi: FrozenLaw = None) -> StationaryFamily:
    return StationaryFamily(product_form(spec), partition_nodes(validate_gamma(gamma, spec.J)), phi)
