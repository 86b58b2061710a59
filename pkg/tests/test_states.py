import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twotime.channels import Instrument, kraus_density_vectors
from twotime.errors import ForbiddenPostselection, MissingSlots
from twotime.process import CONDITIONS, prob_w, random_valid_w, trivial_w, validate_w
from twotime.sampling import make_rng, random_instrument, random_pure_state
from twotime.states import (combine, contract_table, density_vector, equal_up_to_scale, eta_matrix,
                            eta_to_w, is_linear, mixture, prob_eta, prob_pure, product_state,
                            pure_state, validate_eta_conditions, w_to_eta)
from twotime.tensor import A1, A2, B1, B2, ket

from conftest import X, instrument_pair, violators

seeds = st.integers(0, 2**32 - 1)
ZERO, ONE = np.array([1, 0]), np.array([0, 1])
PLUS = np.array([1, 1]) / np.sqrt(2)


def prepost_oracle(phi, psi, inst):
    """Pre-select psi, post-select phi: weights sum_mu |<phi|E|psi>|^2."""
    w = np.array([sum(abs(np.vdot(phi, E @ psi)) ** 2 for E in group) for group in inst.outcomes])
    return w / w.sum()


def test_prepost_z_with_plus_postselection():
    p = prob_pure(product_state(PLUS, ZERO), Instrument.projective(np.eye(2)))
    np.testing.assert_allclose(p, [1, 0], atol=1e-12)


def test_prepost_x_with_orthogonal_postselection():
    xbasis = [PLUS, np.array([1, -1]) / np.sqrt(2)]
    p = prob_pure(product_state(ONE, ZERO), Instrument.projective(xbasis))
    np.testing.assert_allclose(p, [0.5, 0.5], atol=1e-12)


def test_forbidden_postselection():
    with pytest.raises(ForbiddenPostselection):
        prob_pure(product_state(ONE, ZERO), Instrument.projective(np.eye(2)))
    with pytest.raises(ForbiddenPostselection):
        prob_eta(density_vector(product_state(ONE, ZERO)), Instrument.projective(np.eye(2)))


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 3), st.integers(1, 3))
def test_prepost_rule_matches_oracle(seed, d_in, d_out):
    rng = make_rng(seed)
    psi, phi = random_pure_state(d_in, rng), random_pure_state(d_out, rng)
    inst = random_instrument(d_in, d_out, rng, n_outcomes=3, kraus_per_outcome=2)
    state = product_state(phi, psi)
    expected = prepost_oracle(phi, psi, inst)
    np.testing.assert_allclose(prob_pure(state, inst), expected, atol=1e-12)
    np.testing.assert_allclose(prob_eta(density_vector(state), inst), expected, atol=1e-12)


def test_pure_state_layout():
    s = pure_state(np.arange(6).reshape(3, 2))
    assert set(s.labels) == {A2.down, A1.up}
    assert s.dim(A2) == 3 and s.dim(A1) == 2


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_mixture_probabilities_mix_weights(seed):
    rng = make_rng(seed)
    inst = random_instrument(2, 2, rng, n_outcomes=2, kraus_per_outcome=2)
    states = [product_state(random_pure_state(2, rng), random_pure_state(2, rng)) for _ in range(2)]
    eta = mixture(states, [0.3, 0.7])
    raw = [contract_table(density_vector(s), inst) for s in states]
    np.testing.assert_allclose(contract_table(eta, inst), 0.3 * raw[0] + 0.7 * raw[1], atol=1e-13)


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_w_eta_round_trip_is_exact(seed):
    W = random_valid_w(seed=seed)
    eta = w_to_eta(W)
    assert eta.positive and eta.linear
    assert eta_to_w(eta) == W
    np.testing.assert_array_equal(eta_matrix(eta), W.matrix)


@settings(max_examples=20, deadline=None)
@given(seeds, st.tuples(*[st.integers(1, 3)] * 4).filter(lambda d: np.prod(d) <= 36))
def test_probabilities_agree_between_representations(seed, dims):
    W = random_valid_w(dims, seed=seed)
    alice, bob = instrument_pair(seed, dims)
    pw = prob_w(W, alice, bob)
    eta = w_to_eta(W)
    np.testing.assert_allclose(contract_table(eta, alice, bob), pw, atol=1e-12)
    np.testing.assert_allclose(prob_eta(eta, alice, bob), pw, atol=1e-12)


def test_eta_slots_for_w():
    eta = w_to_eta(trivial_w((2, 3, 2, 3))).tensor
    assert eta.dim(A2) == 3 and eta.dim(B1) == 2
    assert A1.up in eta.labels and B2.down in eta.labels


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_condition_residuals_match_on_valid(seed):
    W = random_valid_w(seed=seed)
    rw, re_ = validate_w(W), validate_eta_conditions(w_to_eta(W))
    for name in CONDITIONS:
        assert rw[name].residual == pytest.approx(re_[name].residual, abs=1e-12)
    assert re_.passed


@pytest.mark.parametrize("condition", CONDITIONS)
def test_violators_fail_the_same_eta_condition(condition):
    W = violators()[condition]
    re_ = validate_eta_conditions(w_to_eta(W))
    rw = validate_w(W)
    assert re_.failed() == [condition]
    for name in CONDITIONS:
        assert re_[name].residual == pytest.approx(rw[name].residual, rel=1e-10, abs=1e-13)


def test_w_to_eta_flags_violations():
    eta = w_to_eta(violators()["alice_reduced"])
    assert eta.positive and not eta.linear
    assert w_to_eta(violators()["positivity"]).positive is False


def test_eta_to_w_needs_bipartite_slots():
    with pytest.raises(MissingSlots):
        eta_to_w(density_vector(product_state(ONE, ZERO)))


def test_linearity_of_valid_w():
    rep = is_linear(w_to_eta(random_valid_w(seed=3)), n_samples=30, seed=1)
    assert rep.passed and rep.details["agrees"]


def test_linearity_rescale_note():
    eta = w_to_eta(random_valid_w(seed=3)).scaled(7.0)
    rep = is_linear(eta, n_samples=10)
    assert not rep.passed
    assert "rescaling" in rep.details["note"]
    assert rep.details["scale"] == pytest.approx(7)


@pytest.mark.parametrize("condition", ["alice_reduced", "bob_reduced", "output_splitting"])
def test_linearity_fails_for_signalling_violators(condition):
    rep = is_linear(w_to_eta(violators()[condition]), n_samples=30)
    assert not rep.passed and rep.details["agrees"]


def test_single_party_state_is_not_linear():
    rep = is_linear(density_vector(product_state(PLUS, ZERO)), n_samples=10)
    assert not rep.passed


def test_combined_product_states_factorize():
    alice = density_vector(product_state(PLUS, ZERO)).tensor
    bob = density_vector(product_state(ONE, PLUS, B2, B1)).tensor
    eta = combine(alice, bob)
    za = Instrument.projective(np.eye(2))
    xb = Instrument.projective([PLUS, np.array([1, -1]) / np.sqrt(2)], B1, B2)
    joint = prob_eta(eta, za, xb)
    np.testing.assert_allclose(joint, np.outer(prob_eta(alice, za), prob_eta(bob, xb)), atol=1e-12)


def test_density_vectors_can_be_passed_directly():
    eta = w_to_eta(trivial_w())
    Zs = Instrument.projective(np.eye(2))
    Js = kraus_density_vectors(Zs)
    Ks = kraus_density_vectors(Zs.on(B1, B2))
    np.testing.assert_allclose(contract_table(eta, Js, Ks), np.full((2, 2), 0.25), atol=1e-15)


def test_equal_up_to_scale():
    eta = w_to_eta(random_valid_w(seed=5))
    assert equal_up_to_scale(eta, eta.scaled(3.0))
    assert not equal_up_to_scale(eta, eta.scaled(-1.0))
    assert not equal_up_to_scale(eta, w_to_eta(random_valid_w(seed=6)))


def test_phase_instrument_changes_two_time_statistics():
    # Same POVM, different Kraus: post-selection on |0> tells them apart.
    state = density_vector(product_state(ZERO, PLUS))
    keep = Instrument([[np.diag([1, 0])], [np.diag([0, 1])]])
    flip = Instrument([[np.diag([1, 0])], [X @ np.diag([0, 1])]])
    np.testing.assert_allclose(prob_eta(state, keep), [1, 0], atol=1e-15)
    np.testing.assert_allclose(prob_eta(state, flip), [0.5, 0.5], atol=1e-15)
    assert np.allclose(keep.povm(1), flip.povm(1))


def test_ket_helper_consistency():
    # <0|_A2 (x) |0>^A1 contracted with the identity gives 1.
    s = product_state(ZERO, ZERO)
    assert abs(prob_pure(s, Instrument.identity(2))[0] - 1) < 1e-15
    assert ket(ZERO, A1).dim(A1) == 2
