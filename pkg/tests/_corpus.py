"""Deterministic random test corpora shared by the test modules."""
import numpy as np

from renvnet.environment import EnvironmentSpec
from renvnet.jackson import NetworkSpec, ServiceRateFunction, solve_traffic

EX23 = np.array([
    [0.0, 1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.6, 0.4],
    [1.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 1.0, 0.0],
])
EX23_ALPHA = np.array([1.0, 1.0, 0.5, 1.0, 1.0])


def random_chain(rng, dim, density=0.4):
    """Irreducible chain: a random Hamiltonian cycle plus sparse extra weights in [0.1, 1]."""
    W = np.where(rng.random((dim, dim)) < density, rng.uniform(0.1, 1.0, (dim, dim)), 0.0)
    perm = rng.permutation(dim)
    for a, b in zip(perm, np.roll(perm, -1)):
        W[a, b] = max(W[a, b], rng.uniform(0.1, 1.0))
    return W / W.sum(axis=1, keepdims=True)


def random_alpha(rng, dim, p_zero=0.2):
    a = np.where(rng.random(dim) < p_zero, 0.0, rng.uniform(0.1, 1.0, dim))
    if not a.any():
        a[rng.integers(dim)] = rng.uniform(0.1, 1.0)
    return a


def reversible_chain(rng, dim, density=0.5, zero_diag=False):
    """Chain ``w / rowsum`` from symmetric weights; stationary law is proportional to the row sums."""
    W = np.where(rng.random((dim, dim)) < density, rng.uniform(0.1, 1.0, (dim, dim)), 0.0)
    for a in range(dim):
        b = (a + 1) % dim
        W[a, b] = max(W[a, b], rng.uniform(0.1, 1.0))
    W = np.triu(W) + np.triu(W, 1).T
    if zero_diag:
        np.fill_diagonal(W, 0.0)
    return W / W.sum(axis=1, keepdims=True), W.sum(axis=1) / W.sum()


def chains(n, seed, max_dim=8):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        dim = int(rng.integers(2, max_dim + 1))
        out.append((random_chain(rng, dim), random_alpha(rng, dim)))
    return out


def reversible_chains(n, seed, max_dim=8):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        dim = int(rng.integers(2, max_dim + 1))
        r, eta = reversible_chain(rng, dim)
        out.append((r, eta, random_alpha(rng, dim)))
    return out


def _rates(rng, eta_j, load_dependent):
    rho = rng.uniform(0.3, 0.8)
    tail = eta_j / rho
    if not load_dependent:
        return ServiceRateFunction.constant(tail)
    if rng.random() < 0.5:
        c = int(rng.integers(2, 4))
        return ServiceRateFunction.multi_server(c, tail / c)
    size = int(rng.integers(1, 4))
    return ServiceRateFunction(tuple(rng.uniform(0.3, 1.5, size) * tail), tail)


def random_network(rng, J, load_dependent=False):
    r = random_chain(rng, J + 1)
    r[0, 0] = 0.0
    if not r[0].any():
        r[0, 1] = 1.0
    r[0] /= r[0].sum()
    lam_total = rng.uniform(0.5, 2.0)
    lam = lam_total * r[0, 1:]
    # row 0 must equal lam / sum(lam) to the last bit
    r[0, 1:] = lam / lam.sum()
    spec = NetworkSpec(lam, r, [1.0] * J)
    eta = solve_traffic(spec)
    mu = [_rates(rng, eta[j], load_dependent) for j in range(1, J + 1)]
    return NetworkSpec(lam, r, mu)


def reversible_network(rng, J, load_dependent=False):
    # symmetric weights with an empty exterior diagonal
    dim = J + 1
    S = np.where(rng.random((dim, dim)) < 0.6, rng.uniform(0.1, 1.0, (dim, dim)), 0.0)
    for a in range(dim):
        S[a, (a + 1) % dim] = max(S[a, (a + 1) % dim], rng.uniform(0.1, 1.0))
    S = np.triu(S) + np.triu(S, 1).T
    S[0, 0] = 0.0
    W = S / S.sum(axis=1, keepdims=True)
    lam = rng.uniform(0.5, 2.0) * W[0, 1:]
    W[0, 1:] = lam / lam.sum()
    spec = NetworkSpec(lam, W, [1.0] * J)
    eta = solve_traffic(spec)
    mu = [_rates(rng, eta[j], load_dependent) for j in range(1, J + 1)]
    return NetworkSpec(lam, W, mu)


def networks(seed=7, n=12):
    """At least ``n`` ergodic networks with ``J <= 4``; every other one has load-dependent rates."""
    rng = np.random.default_rng(seed)
    return [random_network(rng, int(rng.integers(1, 5)), load_dependent=bool(i % 2)) for i in range(n)]


def reversible_networks(seed=11, n=6):
    rng = np.random.default_rng(seed)
    sizes = [2, 3, 1, 4, 2, 3]
    return [reversible_network(rng, sizes[i % len(sizes)], load_dependent=bool(i % 2)) for i in range(n)]


def tandem(rho=(0.5, 0.25)):
    r = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
    return NetworkSpec([1.0, 0.0], r, [1.0 / rho[0], 1.0 / rho[1]])


def mm1(lam=1.0, mu=2.0):
    return NetworkSpec([lam], np.array([[0.0, 1.0], [1.0, 0.0]]), [mu])


def ex33_network(mu=(2.0, 3.0, 2.5, 1.5)):
    return NetworkSpec([1.0, 0.0, 0.0, 0.0], EX23, list(mu))


def random_generator(rng, K, density=0.6):
    V = np.where(rng.random((K, K)) < density, rng.uniform(0.1, 2.0, (K, K)), 0.0)
    np.fill_diagonal(V, 0.0)
    np.fill_diagonal(V, -V.sum(axis=1))
    return V


def random_environment(rng, J, K, mode="skipping", blocked=False):
    V = random_generator(rng, K)
    R = []
    for j in range(J):
        if rng.random() < 0.4:
            R.append(np.eye(K))
        else:
            R.append(random_chain(rng, K, density=0.5) if K > 1 else np.eye(1))
    gam = rng.uniform(0.2, 2.0, (K, J))
    if blocked and K > 1:
        gam[1, 0] = 0.0
    return EnvironmentSpec(V, tuple(R), gam, mode)


def coupled_instances(seed=5):
    """Coupled network/environment pairs with ``J <= 3`` and ``|K| <= 4``; each has some ``R_j != I``."""
    rng = np.random.default_rng(seed)
    out = []
    shapes = [(1, 2), (2, 2), (2, 3), (3, 2), (2, 4), (3, 3)]
    for idx, (J, K) in enumerate(shapes):
        spec = random_network(rng, J, load_dependent=bool(idx % 2))
        env = random_environment(rng, J, K, blocked=(idx == 4))
        if all(np.array_equal(Rj, np.eye(K)) for Rj in env.R):
            R = list(env.R)
            R[0] = np.roll(np.eye(K), 1, axis=1)
            env = EnvironmentSpec(env.V, tuple(R), env.gammas, env.mode)
        out.append((spec, env))
    return out


def two_node_two_status():
    """Two nodes with feedback; departures from node 2 can switch the environment."""
    spec = NetworkSpec.from_internal([1.0, 0.5], [[0.0, 0.5], [0.2, 0.0]], [3.0, 2.5])
    env = EnvironmentSpec(
        np.array([[-0.5, 0.5], [1.0, -1.0]]),
        (np.eye(2), np.array([[0.8, 0.2], [0.3, 0.7]])),
        np.array([[1.0, 1.0], [0.5, 2.0]]),
        "skipping", ("up", "degraded"))
    return spec, env
