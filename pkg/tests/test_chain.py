import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from renvnet.chain import (check_irreducible, check_reversible, generator_stationary, guarded_ratio,
                           invariant_residual, stationary_distribution, validate_stochastic)
from renvnet.errors import DimensionError, NotIrreducible, RowSumError, ValidationError
from renvnet.randomization import skip_modify

from _corpus import EX23, chains, random_chain, reversible_chain


def power_iteration(P, tol=1e-14, max_iter=100_000):
    # lazy version so periodic chains converge too
    L = 0.5 * (np.eye(len(P)) + P)
    x = np.full(len(P), 1.0 / len(P))
    for _ in range(max_iter):
        y = x @ L
        if np.max(np.abs(y - x)) < tol:
            return y
        x = y
    raise AssertionError("power iteration did not converge")


class TestValidation:
    def test_accepts_stochastic(self):
        P = validate_stochastic(EX23)
        assert not P.flags.writeable

    def test_row_sum_error_names_row(self):
        P = EX23.copy()
        P[2, 3] = 0.5
        with pytest.raises(RowSumError) as err:
            validate_stochastic(P)
        assert err.value.row == 2
        assert err.value.to_dict()["row"] == 2

    def test_non_square(self):
        with pytest.raises(DimensionError):
            validate_stochastic(np.ones((2, 3)) / 3)

    def test_negative_entry(self):
        with pytest.raises(ValidationError):
            validate_stochastic([[1.5, -0.5], [0.5, 0.5]])


class TestStationary:
    def test_two_state_flip(self):
        pi = stationary_distribution([[0.0, 1.0], [1.0, 0.0]])
        assert np.allclose(pi, [0.5, 0.5], atol=1e-15)

    def test_identity_not_irreducible(self):
        with pytest.raises(NotIrreducible) as err:
            stationary_distribution(np.eye(3))
        assert len(err.value.classes) == 3

    def test_example_matrix(self):
        pi = stationary_distribution(EX23)
        oracle = power_iteration(EX23)
        assert np.max(np.abs(pi - oracle)) < 1e-12
        assert np.max(np.abs(pi - np.array([5, 5, 5, 5, 2]) / 22)) < 1e-12
        assert invariant_residual(pi, EX23) <= 1e-12

    def test_unichain_with_transient_state(self):
        P = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
        pi = stationary_distribution(P)
        assert pi[0] == 0.0
        assert np.allclose(pi, [0, 0.5, 0.5])

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(2, 8))
    def test_random_chains_match_power_iteration(self, seed, dim):
        P = random_chain(np.random.default_rng(seed), dim)
        pi = stationary_distribution(P)
        assert invariant_residual(pi, P) <= 1e-12
        assert np.max(np.abs(pi - power_iteration(P))) < 1e-10


class TestIrreducible:
    def test_example_single_class(self):
        dec = check_irreducible(EX23)
        assert dec.irreducible
        assert dec.classes == ((0, 1, 2, 3, 4),)

    def test_block_diagonal(self):
        B = np.array([[0.0, 1.0], [1.0, 0.0]])
        P = np.block([[B, np.zeros((2, 2))], [np.zeros((2, 2)), B]])
        dec = check_irreducible(P)
        assert dec.classes == ((0, 1), (2, 3))
        assert dec.closed == (True, True)

    def test_taboo_state_becomes_inessential(self):
        K = skip_modify(EX23, [1, 1, 0, 1, 1]).kernel
        dec = check_irreducible(K)
        assert dec.closed_classes == ((0, 1, 3, 4),)
        assert (2,) in dec.classes
        # brute-force reachability
        reach = (K > 0).astype(int)
        closure = np.linalg.matrix_power(np.eye(5, dtype=int) + reach, 5) > 0
        assert not closure[:, 2][[0, 1, 3, 4]].any()


class TestReversible:
    def test_symmetric_weights(self):
        r, eta = reversible_chain(np.random.default_rng(3), 6)
        assert check_reversible(r, eta)

    def test_cycle_not_reversible(self):
        P = np.roll(np.eye(3), 1, axis=1)
        assert not check_reversible(P, np.full(3, 1 / 3))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            check_reversible(np.eye(2), [1.0])


class TestGenerator:
    def test_two_state(self):
        theta = generator_stationary([[-1.0, 1.0], [2.0, -2.0]])
        assert np.allclose(theta, [2 / 3, 1 / 3], atol=1e-15)

    def test_reducible(self):
        with pytest.raises(NotIrreducible):
            generator_stationary(np.zeros((2, 2)))


class TestGuardedRatio:
    def test_zero_over_zero(self):
        assert guarded_ratio(0.0, 0.0) == 0.0
        assert np.array_equal(guarded_ratio([1.0, 0.0], [2.0, 0.0]), [0.5, 0.0])

    def test_nonzero_over_zero(self):
        with pytest.raises(ZeroDivisionError):
            guarded_ratio(1.0, 0.0)


def test_corpus_chains_are_irreducible():
    for P, _ in chains(50, seed=1):
        assert check_irreducible(P).irreducible
