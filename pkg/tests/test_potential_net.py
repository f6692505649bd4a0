import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from homeostasis import potential_net as pn
from homeostasis import tensor_core as tc

from oracles import central_gradient, random_rotation

L2 = pn.PotentialWeights(0.0, 0.0, 3.980602e-08, 0.03391496, 0.0, 0.0, 7.274134e-08, 0.03408322, 0.26240048)

pot_weights = st.builds(
    lambda w, abs_mode: pn.PotentialWeights.from_array(
        w, pn.ActivationMode.ABS if abs_mode else pn.ActivationMode.NEG_MAX
    ),
    arrays(float, 9, elements=st.floats(0.0, 2.0)),
    st.booleans(),
)
stress = arrays(float, 6, elements=st.floats(-30.0, 30.0)).map(lambda x: tc.sym_tensor(*x))


def test_weights_must_be_non_negative():
    with pytest.raises(ValueError):
        pn.PotentialWeights(ws4=-1e-3)
    assert pn.PotentialWeights().activation_mode is pn.ActivationMode.NEG_MAX


def test_principal_state_examples():
    p = pn.principal_state(np.zeros((3, 3)))
    assert np.all(p.sigma == 0) and np.all(p.tau == 0)
    p = pn.principal_state(np.diag([2.0, 0.0, 0.0]))
    np.testing.assert_array_equal(p.sigma, [2.0, 0.0, 0.0])
    np.testing.assert_array_equal(p.tau, [1.0, 1.0, 0.0])
    p = pn.principal_state(np.diag([1.0, -1.0, 0.0]))
    np.testing.assert_array_equal(p.sigma, [1.0, 0.0, -1.0])
    np.testing.assert_array_equal(p.tau, [1.0, 0.5, 0.5])


@given(stress)
@settings(max_examples=200, deadline=None)
def test_principal_state_ordering(s):
    p = pn.principal_state(s)
    assert p.sigma[0] >= p.sigma[1] >= p.sigma[2]
    assert p.tau[0] >= max(p.tau[1], p.tau[2]) - 1e-12
    assert np.all(p.tau >= 0)


def test_phi_hat_examples():
    assert pn.phi_hat(np.zeros((3, 3)), L2) == 0.0
    assert pn.phi_hat(np.diag([1.0, 0.0, 0.0]), L2) == pytest.approx(0.06799818, rel=1e-6)
    w = pn.PotentialWeights(ws4=0.5)
    assert pn.phi_hat(-np.eye(3), w) == 0.0


def test_activation_values():
    assert pn.activations(0.0)[1] == 0.0
    assert pn.activations(50.0)[1] == pytest.approx(50.0 - np.log(2.0), abs=1e-14)
    assert pn.activations(1e5)[1] == pytest.approx(1e5 - np.log(2.0), rel=1e-15)
    assert pn.activations(-3.0, pn.ActivationMode.NEG_MAX)[0] == 3.0
    assert pn.activations(-3.0, pn.ActivationMode.ABS)[0] == 3.0
    assert pn.activations(3.0, pn.ActivationMode.NEG_MAX)[0] == 0.0
    assert pn.activations(3.0, pn.ActivationMode.ABS)[0] == 3.0
    assert pn.activations(-3.0)[2] == 0.0


def test_lncosh_is_stable():
    y = np.array([-800.0, -1.0, 0.0, 1.0, 800.0])
    v = pn.lncosh(y)
    assert np.all(np.isfinite(v))
    np.testing.assert_allclose(v[1:4], np.log(np.cosh(y[1:4])), rtol=1e-15)


def test_flow_at_zero_stress_follows_active_branch():
    # max-kinks take the active-branch slope, so tension neurons contribute
    flow = pn.dphihat_dsigma(np.zeros((3, 3)), L2)
    np.testing.assert_allclose(
        flow, np.diag([0.03391496 + 0.03408322, 0.03391496, 0.03391496 - 0.03408322]), rtol=1e-12, atol=1e-18
    )
    # no tension weights: the compression neuron drives shrinkage at zero stress
    assert pn.dphihat_dsigma(np.zeros((3, 3)), pn.PotentialWeights(ws1=1.0))[0, 0] == -1.0
    assert np.all(pn.dphihat_dsigma(np.zeros((3, 3)), pn.PotentialWeights(ws1=1.0, activation_mode="abs")) == 0)


def test_kink_slopes():
    assert pn.d_pos_neuron(0.0) == 1.0
    assert pn.d_neg_neuron(0.0, pn.ActivationMode.NEG_MAX) == -1.0
    assert pn.d_neg_neuron(0.0, pn.ActivationMode.ABS) == 0.0


def test_gradient_matches_differences(rng):
    for _ in range(100):
        w = pn.PotentialWeights.from_array(rng.uniform(0.0, 1.0, 9))
        s = rng.normal(size=(3, 3)) * 3
        s = 0.5 * (s + s.T)
        ref = central_gradient(lambda x: pn.phi_hat(x, w), s)
        got = pn.dphihat_dsigma(s, w)
        assert np.linalg.norm(got - ref) <= 1e-6 * np.linalg.norm(ref)


@given(stress, pot_weights)
@settings(max_examples=300, deadline=None)
def test_flow_coaxial(s, w):
    flow = pn.dphihat_dsigma(s, w)
    assert np.linalg.norm(flow @ s - s @ flow) <= 1e-9 * (1.0 + np.linalg.norm(s) * np.linalg.norm(flow))


@given(stress, pot_weights)
@settings(max_examples=300, deadline=None)
def test_shear_family_is_trace_free(s, w):
    w = pn.PotentialWeights(0, 0, w.ws3, 0, w.wt1, w.wt2, w.wt3, w.wt4, w.weta, w.activation_mode)
    assert abs(tc.tr(pn.dphihat_dsigma(s, w))) <= 1e-14 * max(1.0, w.wt1 + w.wt2 * w.wt3 + w.wt4)


@given(stress, pot_weights)
@settings(max_examples=300, deadline=None)
def test_non_negative_and_dissipative(s, w):
    phi = pn.phi_hat(s, w)
    assert phi >= 0.0
    assert float(np.sum(pn.dphihat_dsigma(s, w) * s)) >= phi - 1e-10 * max(1.0, phi)


@given(stress, stress, pot_weights, st.sampled_from([0.25, 0.5, 0.75]))
@settings(max_examples=300, deadline=None)
def test_convexity(a, b, w, t):
    lhs = pn.phi_hat(t * a + (1 - t) * b, w)
    rhs = t * pn.phi_hat(a, w) + (1 - t) * pn.phi_hat(b, w)
    assert lhs <= rhs + 1e-10 * max(1.0, rhs)


def test_isotropy(rng):
    for _ in range(200):
        w = pn.PotentialWeights.from_array(rng.uniform(0, 1, 9), "abs" if rng.random() < 0.5 else "neg_max")
        s = rng.normal(size=(3, 3)) * 5
        s = 0.5 * (s + s.T)
        q = random_rotation(rng)
        ref = pn.phi_hat(s, w)
        assert abs(pn.phi_hat(q @ s @ q.T, w) - ref) <= 1e-10 * max(1.0, ref)


def test_shear_neurons_degenerate(rng):
    for _ in range(500):
        s = rng.normal(size=(3, 3))
        tau = pn.principal_state(s + s.T).tau
        assert np.all(pn.neg_neuron(tau, pn.ActivationMode.NEG_MAX) == 0.0)
        assert np.all(pn.pos_neuron(tau) == tau)
        assert np.all(pn.neg_neuron(tau, pn.ActivationMode.ABS) == pn.pos_neuron(tau))


def test_abs_shear_weights_enter_as_sum(rng):
    s = rng.normal(size=(3, 3))
    s = s + s.T
    a = pn.PotentialWeights(wt1=0.3, wt4=0.1, activation_mode="abs")
    b = pn.PotentialWeights(wt1=0.0, wt4=0.4, activation_mode="abs")
    assert pn.phi_hat(s, a) == pytest.approx(pn.phi_hat(s, b), rel=1e-14)


def test_jvp_matches_differences(rng):
    w = pn.PotentialWeights.from_array(rng.uniform(0.1, 1.0, 9))
    s = rng.normal(size=(3, 3))
    s = s + s.T
    ds = rng.normal(size=(1, 3, 3))
    ds = ds + np.swapaxes(ds, 1, 2)
    dw = rng.normal(size=(1, 9))
    state, _, _ = pn.potential_terms(s, w)
    dphi, dflow = pn.potential_jvp(state, w, ds, dw)
    h = 1e-6

    def at(t):
        wt = pn.PotentialWeights.from_array(w.as_array() + t * dw[0])
        return pn.phi_hat(s + t * ds[0], wt), pn.dphihat_dsigma(s + t * ds[0], wt)

    (pp, fp), (pm, fm) = at(h), at(-h)
    assert dphi[0] == pytest.approx((pp - pm) / (2 * h), rel=1e-7)
    np.testing.assert_allclose(dflow[0], (fp - fm) / (2 * h), atol=1e-7)


def test_weight_names_by_mode():
    assert pn.weight_names("abs")[0] == "wsABS"
    assert pn.weight_names("neg_max") == pn.POTENTIAL_WEIGHT_NAMES
