r"""Jackson network in a random environment with two-way interaction.

The environment takes values in a finite status set ``K``.  It moves on
its own with generator ``V`` and, whenever node ``j`` releases a customer
to the exterior while in status ``k``, it jumps to ``m`` with probability
``R_j[k, m]`` (a single atomic transition).  In status ``k`` the nodes run
with capacity factors ``gamma(k)``, handled by the rerouting control of
:mod:`renvnet.capacity`.

The stationary law is ``pi(n, k) = xi(n) theta(k)`` where ``theta`` solves
``theta Q_red = 0`` for the reduced generator

.. math::

    Q_{red} = V + \sum_j \eta_j\,\mathrm{diag}_k\big(\gamma_j(k)\, r^{\alpha(k)}(j, 0)\big)(R_j - I).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .capacity import ControlPair, arrival_rates, derive_controls, kernel_residual, normalized_traffic, validate_gamma
from .chain import COMPARE_TOL, VALIDATION_TOL, _frozen, check_reversible, generator_stationary, validate_stochastic
from .errors import AllBlockedWarning, DimensionError, HypothesisViolated, NotAGenerator, ValidationError
from .jackson import GeneratorView, NetworkSpec, ProductFormDistribution, product_form, solve_traffic
from .randomization import ModifiedChain, modify, taboo_set

MODES = ("skipping", "reflection", "user_supplied")


def validate_generator(V, tol=VALIDATION_TOL, what="environment generator") -> np.ndarray:
    V = np.asarray(V, dtype=float)
    if V.ndim != 2 or V.shape[0] != V.shape[1] or V.shape[0] == 0:
        raise DimensionError(f"{what} must be a non-empty square matrix, got shape {V.shape}")
    if not np.all(np.isfinite(V)):
        raise ValidationError(f"{what} has non-finite entries")
    off = V[~np.eye(V.shape[0], dtype=bool)]
    if np.any(off < 0):
        raise ValidationError(f"{what} has negative off-diagonal entries")
    sums = V.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums) > tol)
    if bad.size:
        raise ValidationError(f"row {int(bad[0])} of {what} sums to {sums[bad[0]]!r}, expected 0")
    return _frozen(V)


@dataclass(frozen=True)
class EnvironmentSpec:
    """Finite environment.

    ``gammas[k]`` holds the capacity factors of nodes ``1..J`` in status
    ``k``; ``R[j-1]`` is the jump matrix triggered by departures from
    node ``j``.  ``kernels[k]`` is only read in ``user_supplied`` mode.
    """

    V: np.ndarray
    R: tuple
    gammas: np.ndarray
    mode: str = "skipping"
    labels: tuple = ()
    kernels: Optional[tuple] = None

    def __post_init__(self):
        V = validate_generator(self.V)
        K = V.shape[0]
        R = tuple(validate_stochastic(Rj, what=f"jump matrix R_{j + 1}") for j, Rj in enumerate(self.R))
        for j, Rj in enumerate(R):
            if Rj.shape != (K, K):
                raise DimensionError(f"jump matrix R_{j + 1} has shape {Rj.shape}, expected {(K, K)}")
        gammas = np.asarray(self.gammas, dtype=float)
        if gammas.ndim != 2 or gammas.shape != (K, len(R)):
            raise DimensionError(f"capacity table must be {K}x{len(R)}, got shape {gammas.shape}")
        for row in gammas:
            validate_gamma(row)
        if self.mode not in MODES:
            raise ValidationError(f"unknown rerouting mode {self.mode!r}")
        labels = tuple(str(x) for x in self.labels) or tuple(str(k) for k in range(K))
        if len(labels) != K or len(set(labels)) != K:
            raise DimensionError(f"need {K} distinct status labels")
        kernels = self.kernels
        if self.mode == "user_supplied":
            if kernels is None or len(kernels) != K:
                raise ValidationError("user_supplied mode needs one kernel per status")
            kernels = tuple(validate_stochastic(k, what=f"kernel for status {labels[i]}")
                            for i, k in enumerate(kernels))
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "gammas", _frozen(gammas))
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "kernels", kernels)

    @property
    def K(self) -> int:
        return self.V.shape[0]

    @property
    def J(self) -> int:
        return len(self.R)

    def index(self, label) -> int:
        return self.labels.index(str(label))


@dataclass(frozen=True)
class StatusControls:
    controls: ControlPair
    chain: ModifiedChain
    arrivals: tuple


def per_status_controls(spec: NetworkSpec, env: EnvironmentSpec, k: int) -> StatusControls:
    """Control pair and rerouting kernel in status ``k``."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AllBlockedWarning)
        controls = derive_controls(env.gammas[k])
    if env.mode == "user_supplied":
        ker = env.kernels[k]
        if ker.shape != spec.routing.shape:
            raise DimensionError(f"kernel for status {env.labels[k]} has shape {ker.shape}")
        chain = ModifiedChain(ker, "user_supplied", taboo_set(controls.alpha), controls.alpha, spec.routing)
    else:
        chain = modify(spec.routing, controls.alpha, env.mode)
    return StatusControls(controls, chain, tuple(arrival_rates(spec.total_rate, controls.beta, chain.kernel)))


def _shift(n, j, d):
    m = list(n)
    m[j] += d
    return tuple(m)


class CoupledNetwork:
    """Network and environment with every per-status quantity built up front.

    States are pairs ``(n, k)`` with ``n`` a tuple of queue lengths and
    ``k`` a status index.
    """

    def __init__(self, spec: NetworkSpec, env: EnvironmentSpec):
        if env.J != spec.J:
            raise DimensionError(f"environment describes {env.J} nodes, network has {spec.J}")
        self.spec = spec
        self.env = env
        self.eta = solve_traffic(spec)
        self.status = tuple(per_status_controls(spec, env, k) for k in range(env.K))
        self._kernels = [s.chain.kernel.tolist() for s in self.status]
        self._gam = env.gammas.tolist()
        self._R = [Rj.tolist() for Rj in env.R]
        self._V = env.V.tolist()
        self.generator = GeneratorView(self._outgoing, self._incoming,
                                       {"kind": "coupled", "J": spec.J, "K": env.K})

    @property
    def K(self) -> int:
        return self.env.K

    def hypothesis_violation(self) -> Optional[str]:
        """Why the product-form hypothesis of the chosen mode fails, or ``None``."""
        if self.env.mode == "reflection":
            if not check_reversible(self.spec.routing, normalized_traffic(self.spec, self.eta), COMPARE_TOL):
                return "reflection requires routing reversible for the traffic solution"
        elif self.env.mode == "user_supplied":
            for k, s in enumerate(self.status):
                res = kernel_residual(s.chain.kernel, s.controls.alpha, self.eta)
                if res > COMPARE_TOL:
                    return f"kernel for status {self.env.labels[k]} has invariant residual {res:.3e}"
        return None

    def _outgoing(self, state):
        n, k = state
        J = len(n)
        mu = self.spec.mu
        ker = self._kernels[k]
        gam = self._gam[k]
        out = []
        arr = self.status[k].arrivals
        for i in range(1, J + 1):
            if arr[i - 1] > 0:
                out.append(((_shift(n, i - 1, 1), k), arr[i - 1]))
        for j in range(1, J + 1):
            if n[j - 1] == 0 or gam[j - 1] == 0:
                continue
            s = gam[j - 1] * mu[j - 1](n[j - 1])
            for i in range(1, J + 1):
                if i != j and ker[j][i] > 0:
                    out.append(((_shift(_shift(n, j - 1, -1), i - 1, 1), k), s * ker[j][i]))
            if ker[j][0] > 0:
                d = s * ker[j][0]
                m_n = _shift(n, j - 1, -1)
                for m, p in enumerate(self._R[j - 1][k]):
                    if p > 0:
                        out.append(((m_n, m), d * p))
        for m, v in enumerate(self._V[k]):
            if m != k and v > 0:
                out.append(((n, m), v))
        return out

    def _incoming(self, state):
        n, k = state
        J = len(n)
        mu = self.spec.mu
        ker = self._kernels[k]
        gam = self._gam[k]
        inc = []
        arr = self.status[k].arrivals
        for i in range(1, J + 1):
            if n[i - 1] > 0 and arr[i - 1] > 0:
                inc.append(((_shift(n, i - 1, -1), k), arr[i - 1]))
        for j in range(1, J + 1):
            up = _shift(n, j - 1, 1)
            rate = mu[j - 1](n[j - 1] + 1)
            if gam[j - 1] > 0:
                s = gam[j - 1] * rate
                for i in range(1, J + 1):
                    if i != j and n[i - 1] > 0 and ker[j][i] > 0:
                        inc.append(((_shift(up, i - 1, -1), k), s * ker[j][i]))
            for m in range(self.K):
                p = self._R[j - 1][m][k]
                g = self._gam[m][j - 1]
                e = self._kernels[m][j][0]
                if p > 0 and g > 0 and e > 0:
                    inc.append(((up, m), g * rate * e * p))
        for m in range(self.K):
            v = self._V[m][k]
            if m != k and v > 0:
                inc.append(((n, m), v))
        return inc

    def reduced_generator(self, tol=COMPARE_TOL) -> np.ndarray:
        K = self.K
        Q = self.env.V.copy()
        eye = np.eye(K)
        for j in range(1, self.spec.J + 1):
            d = np.array([self._gam[k][j - 1] * self._kernels[k][j][0] for k in range(K)])
            Q += self.eta[j] * (d[:, None] * (self.env.R[j - 1] - eye))
        off = Q[~np.eye(K, dtype=bool)]
        if np.any(off < -tol) or np.max(np.abs(Q.sum(axis=1))) > tol:
            raise NotAGenerator("reduced matrix is not a generator")
        return _frozen(Q)

    def product_pmf(self, theta, xi: Optional[ProductFormDistribution] = None):
        xi = xi or product_form(self.spec, self.eta)
        theta = np.asarray(theta, dtype=float)
        return lambda s: coupled_product_pmf(xi, theta, s)


def coupled_network(spec: NetworkSpec, env: EnvironmentSpec) -> CoupledNetwork:
    return CoupledNetwork(spec, env)


def coupled_generator(spec: NetworkSpec, env: EnvironmentSpec) -> GeneratorView:
    """Generator of the joint process on ``N_0^J x K``.

    From ``(n, k)``: arrivals and internal transfers keep ``k``; a
    departure from node ``j`` lands in ``(n - e_j, m)`` with the routing
    rate times ``R_j[k, m]``; the environment alone jumps at ``V[k, m]``.
    """
    return CoupledNetwork(spec, env).generator


def reduced_generator(spec: NetworkSpec, env: EnvironmentSpec) -> np.ndarray:
    return CoupledNetwork(spec, env).reduced_generator()


def solve_theta(Qred) -> np.ndarray:
    """Environment factor ``theta`` with ``theta Q_red = 0``; reports every closed class otherwise."""
    return generator_stationary(Qred)


def coupled_product_pmf(xi: ProductFormDistribution, theta, s) -> float:
    n, k = s
    return xi.pmf(n) * float(theta[k])


def coupled_box(J: int, bound: int, K: int):
    for idx in np.ndindex(*([bound + 1] * J), K):
        yield tuple(int(x) for x in idx[:-1]), int(idx[-1])


def verify_coupled_balance(spec: NetworkSpec, env: EnvironmentSpec, theta, probe_states,
                           network: Optional[CoupledNetwork] = None) -> float:
    """Largest balance residual of ``xi(n) theta(k)`` against the coupled generator.

    Raises :class:`HypothesisViolated` when the rerouting mode's
    precondition (reversibility, or invariance of a supplied kernel) fails.
    """
    net = network or CoupledNetwork(spec, env)
    why = net.hypothesis_violation()
    if why:
        raise HypothesisViolated(why)
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (env.K,):
        raise DimensionError(f"theta has shape {theta.shape}, expected ({env.K},)")
    pmf = net.product_pmf(theta)
    gen = net.generator
    worst = 0.0
    for s in probe_states:
        out = pmf(s) * sum(r for _, r in gen.outgoing(s))
        inflow = sum(pmf(src) * r for src, r in gen.incoming(s))
        worst = max(worst, abs(out - inflow))
    return worst
