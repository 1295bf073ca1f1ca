import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from renvnet.capacity import (derive_controls, effective_arrival_rate, modified_generator, modified_network,
                              partition_nodes, stationary_family)
from renvnet.errors import AllBlockedWarning, HypothesisViolated, InvalidFrozenLaw, NotReversible
from renvnet.jackson import box_states, jackson_generator, product_form, solve_traffic, verify_global_balance

from _corpus import ex33_network, mm1, networks, reversible_networks


class TestControls:
    def test_example(self):
        c = derive_controls([1, 0.5, 1, 1])
        assert np.array_equal(c.alpha, [1, 1, 0.5, 1, 1])
        assert c.beta == 1.0

    def test_no_change(self):
        c = derive_controls([1, 1, 1])
        assert np.array_equal(c.alpha, np.ones(4)) and c.beta == 1.0

    def test_upgrade(self):
        c = derive_controls([2, 0.5])
        assert np.array_equal(c.alpha, [1, 1, 0.25])
        assert c.beta == 2.0

    def test_all_blocked_warns(self):
        with pytest.warns(AllBlockedWarning):
            c = derive_controls([0.0, 0.0])
        assert np.array_equal(c.alpha, [1, 0, 0])

    @given(st.lists(st.floats(0, 50, allow_nan=False), min_size=1, max_size=6))
    def test_identity(self, gamma):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AllBlockedWarning)
            c = derive_controls(gamma)
        g = np.asarray(gamma)
        assert c.alpha[0] == 1.0 and c.beta >= 1.0
        assert np.all(np.abs(c.alpha[1:] * c.beta - g) <= 1e-14 * np.maximum(g, 1.0))
        assert np.all((c.alpha >= 0) & (c.alpha <= 1))


class TestPartition:
    def test_examples(self):
        assert partition_nodes([1, 0.5, 1, 1]).blocked == ()
        assert partition_nodes([0, 1]).blocked == (1,)
        p = partition_nodes([0, 0, 0])
        assert p.blocked == (1, 2, 3) and p.working == ()


class TestModifiedGenerator:
    def test_identity_gamma_matches_jackson(self):
        for spec in networks():
            a, b = jackson_generator(spec), modified_generator(spec, np.ones(spec.J))
            for s in box_states(spec.J, 2):
                assert a.outgoing(s) == b.outgoing(s)

    def test_example_node1_departures(self):
        spec = ex33_network()
        out = dict(modified_generator(spec, [1, 0.5, 1, 1]).outgoing((1, 0, 0, 0)))
        mu1 = spec.mu[0](1)
        assert out[(0, 1, 0, 0)] == pytest.approx(0.5 * mu1, abs=1e-12)
        assert out[(0, 0, 1, 0)] == pytest.approx(0.3 * mu1, abs=1e-12)
        assert out[(0, 0, 0, 1)] == pytest.approx(0.2 * mu1, abs=1e-12)

    @pytest.mark.parametrize("mode", ["skipping", "reflection"])
    def test_blocked_node_frozen(self, mode):
        spec = reversible_networks()[1] if mode == "reflection" else networks()[3]
        assert spec.J >= 2
        gamma = np.ones(spec.J)
        gamma[0] = 0.0
        gen = modified_generator(spec, gamma, mode)
        for s in box_states(spec.J, 3):
            for t, rate in gen.outgoing(s):
                assert t[0] == s[0] and rate > 0

    def test_reflection_needs_reversible(self):
        with pytest.raises(NotReversible):
            modified_generator(ex33_network(), [1, 0.5, 1, 1], "reflection")

    def test_user_kernel_accepted_and_checked(self):
        spec = networks()[2]
        gamma = np.linspace(0.4, 1.0, spec.J)
        skip = modified_network(spec, gamma).kernel
        lazy = 0.5 * skip + 0.5 * np.eye(spec.J + 1)
        mn = modified_network(spec, gamma, "user_supplied", lazy)
        fam = stationary_family(spec, gamma)
        assert verify_global_balance(fam.pmf, mn.generator, box_states(spec.J, 4)) <= 1e-10
        with pytest.raises(HypothesisViolated):
            modified_network(spec, gamma, "user_supplied", spec.routing)


class TestStationaryFamily:
    def test_no_blocked_equals_xi(self):
        spec = networks()[5]
        fam = stationary_family(spec, np.full(spec.J, 0.7))
        xi = product_form(spec)
        for s in box_states(spec.J, 3):
            assert fam.pmf(s) == xi.pmf(s)

    def test_point_mass_balances(self):
        spec = networks()[3]
        gamma = np.ones(spec.J)
        gamma[0] = 0.0
        fam = stationary_family(spec, gamma, {(0,): 1.0})
        gen = modified_generator(spec, gamma)
        assert verify_global_balance(fam.pmf, gen, box_states(spec.J, 4)) <= 1e-10
        assert fam.pmf((1,) + (0,) * (spec.J - 1)) == 0.0

    def test_specific_law_gives_xi(self):
        spec = networks()[3]
        gamma = np.ones(spec.J)
        gamma[0] = 0.0
        fam = stationary_family(spec, gamma, "marginal")
        xi = product_form(spec)
        for s in box_states(spec.J, 3):
            assert fam.pmf(s) == pytest.approx(xi.pmf(s), rel=1e-14)

    def test_invalid_law(self):
        spec = networks()[3]
        gamma = np.ones(spec.J)
        gamma[0] = 0.0
        with pytest.raises(InvalidFrozenLaw):
            stationary_family(spec, gamma, {(0,): 0.5})
        with pytest.raises(InvalidFrozenLaw):
            stationary_family(spec, gamma, None)

    def test_utilization_invariance(self):
        spec = networks()[1]
        xi = product_form(spec)
        for gamma in (np.full(spec.J, 0.3), np.linspace(0.5, 3.0, spec.J)):
            fam = stationary_family(spec, gamma)
            for j in range(spec.J):
                for n in range(21):
                    s = tuple(n if i == j else 0 for i in range(spec.J))
                    assert fam.pmf(s) == xi.pmf(s)


class TestEffectiveArrival:
    def test_no_self_loop(self):
        assert effective_arrival_rate(2.0, 1.5, np.array([[0.0, 1.0], [1.0, 0.0]])) == 3.0

    def test_example(self):
        mn = modified_network(ex33_network(), [1, 0.5, 1, 1])
        assert mn.kernel[0, 0] == 0.0
        assert mn.effective_arrival_rate == 1.0

    def test_single_blocked_node(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AllBlockedWarning)
            mn = modified_network(mm1(), [0.0])
        assert mn.kernel[0, 0] == 1.0
        assert mn.effective_arrival_rate == 0.0
        assert mn.generator.outgoing((0,)) == []


def test_traffic_is_reused():
    spec = networks()[0]
    assert np.array_equal(solve_traffic(spec), solve_traffic(spec))
