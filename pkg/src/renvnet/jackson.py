r"""Open Jackson networks.

Nodes are ``1..J``; index ``0`` of every routing matrix is the exterior
(source and sink).  Service at node ``j`` with ``n`` customers runs at the
total intensity ``mu_j(n)``.

The stationary law is the product form

.. math::

    \xi(n) = \prod_j C(j)^{-1} \prod_{k=1}^{n_j} \eta_j / \mu_j(k)

with ``eta`` the traffic solution.  Balance of a closed-form pmf against a
generator is checked exactly by enumerating, for each probe state, the
states that feed into it (:func:`verify_global_balance`).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .chain import COMPARE_TOL, VALIDATION_TOL, _frozen, check_irreducible, validate_stochastic
from .errors import DimensionError, NotErgodic, NotIrreducible, SingularTraffic, ValidationError

State = tuple


@dataclass(frozen=True)
class ServiceRateFunction:
    """Queue-length dependent service intensity.

    ``table[n-1]`` is the rate with ``n`` customers for ``n <= len(table)``;
    ``tail`` applies to every larger ``n``.
    """

    table: tuple = ()
    tail: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "table", tuple(float(x) for x in self.table))
        object.__setattr__(self, "tail", float(self.tail))
        if not all(x > 0 and np.isfinite(x) for x in self.table) or not (self.tail > 0 and np.isfinite(self.tail)):
            raise ValidationError("service rates must be strictly positive and finite")

    @classmethod
    def constant(cls, rate: float) -> "ServiceRateFunction":
        return cls((), rate)

    @classmethod
    def multi_server(cls, servers: int, rate: float) -> "ServiceRateFunction":
        """``min(n, servers) * rate``."""
        return cls(tuple(k * rate for k in range(1, servers)), servers * rate)

    def __call__(self, n: int) -> float:
        if n < 1:
            raise ValueError("service rate is defined for n >= 1")
        return self.table[n - 1] if n <= len(self.table) else self.tail


@dataclass(frozen=True)
class NetworkSpec:
    """External rates, extended routing matrix and service functions.

    ``routing[0, j]`` must equal ``lam[j-1] / sum(lam)``, ``routing[0, 0]``
    must be zero and the extended matrix must be irreducible.
    """

    lam: np.ndarray
    routing: np.ndarray
    mu: tuple

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        if lam.ndim != 1 or lam.size == 0:
            raise DimensionError("lam must be a non-empty vector")
        if np.any(lam < 0) or not lam.sum() > 0 or not np.all(np.isfinite(lam)):
            raise ValidationError("external rates must be >= 0 with positive total")
        J = lam.size
        routing = validate_stochastic(self.routing, what="routing matrix")
        if routing.shape != (J + 1, J + 1):
            raise DimensionError(f"routing matrix must be {J + 1}x{J + 1}, got {routing.shape}")
        if routing[0, 0] != 0:
            raise ValidationError("routing[0, 0] must be 0")
        expected = lam / lam.sum()
        if np.max(np.abs(routing[0, 1:] - expected)) > VALIDATION_TOL:
            raise ValidationError("routing[0, j] must equal lam_j / lam")
        dec = check_irreducible(routing)
        if not dec.irreducible:
            raise NotIrreducible("extended routing matrix is not irreducible", dec.closed_classes)
        mu = tuple(m if isinstance(m, ServiceRateFunction) else ServiceRateFunction.constant(m)
                   for m in self.mu)
        if len(mu) != J:
            raise DimensionError(f"{len(mu)} service functions for {J} nodes")
        object.__setattr__(self, "lam", _frozen(lam))
        object.__setattr__(self, "routing", routing)
        object.__setattr__(self, "mu", mu)

    @property
    def J(self) -> int:
        return self.lam.size

    @property
    def total_rate(self) -> float:
        return float(self.lam.sum())

    @classmethod
    def from_internal(cls, lam, internal, mu) -> "NetworkSpec":
        """Build the extended matrix from node-to-node routing; exit takes the row remainder."""
        lam = np.asarray(lam, dtype=float)
        P = np.asarray(internal, dtype=float)
        J = lam.size
        if P.shape != (J, J):
            raise DimensionError(f"internal routing must be {J}x{J}")
        r = np.zeros((J + 1, J + 1))
        r[0, 1:] = lam / lam.sum()
        r[1:, 1:] = P
        r[1:, 0] = np.clip(1.0 - P.sum(axis=1), 0.0, None)
        return cls(lam, r, tuple(mu))


def solve_traffic(spec: NetworkSpec) -> np.ndarray:
    """Extended traffic solution ``eta`` with ``eta[0] = lam`` and ``eta @ routing == eta``."""
    J = spec.J
    P = spec.routing[1:, 1:]
    try:
        inner = np.linalg.solve(np.eye(J) - P.T, spec.lam)
    except np.linalg.LinAlgError as exc:
        raise SingularTraffic(f"traffic equations are singular: {exc}") from exc
    eta = np.concatenate(([spec.total_rate], inner))
    if not np.all(eta > 0):
        raise SingularTraffic("traffic solution is not strictly positive")
    if np.max(np.abs(eta @ spec.routing - eta)) > VALIDATION_TOL * max(1.0, eta.max()):
        raise SingularTraffic("traffic solution residual too large")
    return _frozen(eta)


def node_normalizer(eta_j: float, mu_j: ServiceRateFunction) -> float:
    """``C = 1 + sum_{n>=1} prod_{k<=n} eta_j / mu_j(k)``, closed form over the constant tail."""
    if not eta_j > 0:
        raise ValueError("eta_j must be positive")
    rho_tail = eta_j / mu_j.tail
    if rho_tail >= 1:
        raise NotErgodic(f"eta / tail rate = {rho_tail:.6g} >= 1")
    total = 1.0
    w = 1.0
    for rate in mu_j.table:
        w *= eta_j / rate
        total += w
    return total + w * rho_tail / (1.0 - rho_tail)


class ProductFormDistribution:
    """Product-form law over ``N_0^J`` with per-node marginals evaluated in closed form."""

    def __init__(self, eta, mu: Sequence[ServiceRateFunction]):
        self.eta = _frozen(eta)
        self.mu = tuple(mu)
        self.normalizers = _frozen([node_normalizer(self.eta[j + 1], m) for j, m in enumerate(self.mu)])
        self._weights = [[1.0] for _ in self.mu]

    @property
    def J(self) -> int:
        return len(self.mu)

    def weight(self, j: int, n: int) -> float:
        """Unnormalised ``prod_{k<=n} eta_j / mu_j(k)`` for 0-based node ``j``."""
        w = self._weights[j]
        e = self.eta[j + 1]
        while len(w) <= n:
            w.append(w[-1] * e / self.mu[j](len(w)))
        return w[n]

    def marginal(self, j: int, n: int) -> float:
        return self.weight(j, n) / self.normalizers[j]

    def marginal_vector(self, j: int, upto: int) -> np.ndarray:
        return np.array([self.marginal(j, n) for n in range(upto + 1)])

    def tail_mass(self, j: int, upto: int) -> float:
        """Mass of ``{n_j > upto}`` in closed form."""
        m = self.mu[j]
        e = self.eta[j + 1]
        if upto >= len(m.table):
            rho = e / m.tail
            return self.marginal(j, upto) * rho / (1.0 - rho)
        return max(0.0, 1.0 - float(self.marginal_vector(j, upto).sum()))

    def pmf(self, n) -> float:
        if len(n) != self.J:
            raise DimensionError(f"state has {len(n)} coordinates, network has {self.J} nodes")
        p = 1.0
        for j, nj in enumerate(n):
            if nj < 0:
                return 0.0
            p *= self.marginal(j, nj)
        return p

    __call__ = pmf


def product_form(spec: NetworkSpec, eta=None) -> ProductFormDistribution:
    if eta is None:
        eta = solve_traffic(spec)
    return ProductFormDistribution(eta, spec.mu)


def product_form_pmf(dist: ProductFormDistribution, n) -> float:
    return dist.pmf(n)


@dataclass(frozen=True)
class GeneratorView:
    """Lazily evaluated CTMC generator.

    ``outgoing(s)`` lists ``(target, rate)`` with positive rates and no
    self-loops; ``incoming(s)``, when available, lists ``(source, rate)``
    for every transition into ``s``.
    """

    outgoing: Callable
    incoming: Optional[Callable] = None
    describe: dict = field(default_factory=dict, compare=False)


def _shift(n, j, d):
    m = list(n)
    m[j] += d
    return tuple(m)


def network_generator(arrivals, scale, kernel, mu) -> GeneratorView:
    """Generator of a routing network.

    ``arrivals[i-1]`` is the external rate into node ``i``; node ``j``
    serves at ``scale[j-1] * mu_j(n_j)`` and sends the customer to ``i``
    with ``kernel[j, i]`` (``i = 0`` leaves).  Self-routing ``j -> j``
    produces no state change and is omitted.
    """
    kernel = np.asarray(kernel, dtype=float)
    J = len(mu)
    arrivals = [float(a) for a in arrivals]
    scale = [float(g) for g in scale]
    K = kernel.tolist()

    def outgoing(n):
        out = []
        for i in range(1, J + 1):
            if arrivals[i - 1] > 0:
                out.append((_shift(n, i - 1, 1), arrivals[i - 1]))
        for j in range(1, J + 1):
            if n[j - 1] == 0 or scale[j - 1] == 0:
                continue
            s = scale[j - 1] * mu[j - 1](n[j - 1])
            for i in range(1, J + 1):
                if i != j and K[j][i] > 0:
                    out.append((_shift(_shift(n, j - 1, -1), i - 1, 1), s * K[j][i]))
            if K[j][0] > 0:
                out.append((_shift(n, j - 1, -1), s * K[j][0]))
        return out

    def incoming(n):
        inc = []
        for i in range(1, J + 1):
            if n[i - 1] > 0 and arrivals[i - 1] > 0:
                inc.append((_shift(n, i - 1, -1), arrivals[i - 1]))
        for j in range(1, J + 1):
            if scale[j - 1] == 0:
                continue
            s = scale[j - 1] * mu[j - 1](n[j - 1] + 1)
            for i in range(1, J + 1):
                if i != j and n[i - 1] > 0 and K[j][i] > 0:
                    inc.append((_shift(_shift(n, i - 1, -1), j - 1, 1), s * K[j][i]))
            if K[j][0] > 0:
                inc.append((_shift(n, j - 1, 1), s * K[j][0]))
        return inc

    return GeneratorView(outgoing, incoming, {"kind": "network", "J": J})


def jackson_generator(spec: NetworkSpec) -> GeneratorView:
    """Queue-length generator of the unmodified network."""
    lam = spec.total_rate
    arrivals = [lam * spec.routing[0, i] for i in range(1, spec.J + 1)]
    return network_generator(arrivals, [1.0] * spec.J, spec.routing, spec.mu)


def box_states(J: int, bound: int) -> Iterable[tuple]:
    """All states of ``{0..bound}^J``."""
    return (tuple(int(x) for x in idx) for idx in np.ndindex(*([bound + 1] * J)))


def balance_residual(pmf, gen: GeneratorView, state, in_flows=None) -> float:
    in_flows = in_flows or gen.incoming
    out = pmf(state) * sum(rate for _, rate in gen.outgoing(state))
    inflow = sum(pmf(src) * rate for src, rate in in_flows(state))
    return abs(out - inflow)


def verify_global_balance(pmf, gen: GeneratorView, states, in_flows=None) -> float:
    """Largest global-balance residual ``|pmf(n) q(n) - sum_m pmf(m) q(m, n)|`` over ``states``.

    ``in_flows`` defaults to ``gen.incoming``; it must list every transition
    into the probe state so that no truncation enters the check.
    """
    in_flows = in_flows or gen.incoming
    if in_flows is None:
        raise ValueError("generator has no in-flow enumeration; pass in_flows")
    worst = 0.0
    for s in states:
        worst = max(worst, balance_residual(pmf, gen, s, in_flows))
    return worst
