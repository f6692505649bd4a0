import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from homeostasis import energy_net as en
from homeostasis import presets
from homeostasis import tensor_core as tc
from homeostasis.errors import DegenerateMaterialError, DomainError

from oracles import central_gradient, psi_closed_form, random_rotation, random_spd

L2 = en.EnergyWeights(1.2036339, 0.07181329, 1.2016658, 0.3978735)

weights = st.builds(
    en.EnergyWeights,
    st.floats(0.0, 3.0),
    st.floats(0.0, 1.0),
    st.floats(-4.0, 4.0),
    st.floats(0.0, 1.0),
)


def test_weight_validation():
    with pytest.raises(ValueError):
        en.EnergyWeights(-0.1, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        en.EnergyWeights(1.0, 1.0, 1.0, -1.0)
    with pytest.raises(ValueError):
        en.EnergyWeights(1.0, np.nan, 1.0, 1.0)
    assert en.EnergyWeights(1.0, 1.0, -3.5, 0.0).w11 == -3.5


@given(weights)
@settings(max_examples=200, deadline=None)
def test_normalization_is_exact(w):
    assert en.psi(np.eye(3), w) == 0.0
    assert np.all(en.dpsi_dce(np.eye(3), w) == 0.0)
    assert np.all(en.second_pk(np.eye(3), np.eye(3), w) == 0.0)


def test_psi_at_uniaxial_state():
    # 40-digit evaluation of the closed form
    assert en.psi(np.diag([4.0, 1.0, 1.0]), L2) == pytest.approx(0.66035644486637634, rel=1e-13)


def test_psi_pure_volumetric():
    w = en.EnergyWeights(1.7, 0.3, 2.0, 0.0)
    c = 1.3
    ref = w.w02 * (c ** (3 * w.w01) - 1 - 3 * w.w01 * np.log(c))
    assert en.psi(c * np.eye(3), w) == pytest.approx(ref, rel=1e-13)


def test_psi_matches_independent_formula(rng):
    for _ in range(100):
        w = en.EnergyWeights(rng.uniform(0, 3), rng.uniform(0, 1), rng.uniform(-4, 4), rng.uniform(0, 1))
        ce = random_spd(rng)
        lam = np.linalg.eigvalsh(ce)
        assert en.psi(ce, w) == pytest.approx(psi_closed_form(lam, *w.as_array()), rel=1e-11, abs=1e-14)


def test_psi_non_negative(rng):
    for _ in range(300):
        w = en.EnergyWeights(rng.uniform(0, 3), rng.uniform(0, 1), rng.uniform(-4, 4), rng.uniform(0, 1))
        assert en.psi(random_spd(rng, 0.8), w) >= -1e-15


def test_non_spd_rejected():
    with pytest.raises(DomainError):
        en.psi(np.diag([1.0, 1.0, -0.1]), L2)
    with pytest.raises(DomainError):
        en.dpsi_dce(np.diag([1.0, 0.0, 1.0]), L2)


def test_isotropy(rng):
    for _ in range(100):
        w = en.EnergyWeights(rng.uniform(0, 3), rng.uniform(0, 1), rng.uniform(-4, 4), rng.uniform(0, 1))
        ce = random_spd(rng)
        q = random_rotation(rng)
        ref = en.psi(ce, w)
        assert abs(en.psi(q @ ce @ q.T, w) - ref) <= 1e-10 * max(1.0, ref)


def test_derivative_matches_central_differences(rng):
    for _ in range(100):
        w = en.EnergyWeights(rng.uniform(0, 3), rng.uniform(0, 1), rng.uniform(-4, 4), rng.uniform(0, 1))
        ce = random_spd(rng)
        ref = central_gradient(lambda x: en.psi(x, w), ce)
        got = en.dpsi_dce(ce, w)
        np.testing.assert_array_equal(got, got.T)
        assert np.linalg.norm(got - ref) <= 1e-6 * np.linalg.norm(ref)


def test_uniaxial_state_is_coaxial():
    h = en.dpsi_dce(np.diag([1.3, 1.0, 1.0]), L2)
    assert np.count_nonzero(h - np.diag(np.diag(h))) == 0
    assert h[1, 1] == h[2, 2]


def test_driving_force_commutes(rng):
    for _ in range(100):
        ce = random_spd(rng)
        sb = en.driving_force(ce, L2)
        assert np.linalg.norm(sb @ ce - ce @ sb) < 1e-10
        np.testing.assert_allclose(sb, 2 * ce @ en.dpsi_dce(ce, L2), atol=1e-12)


def test_driving_force_spectral_entries_against_differences():
    lam = 1.2
    sb = en.driving_force(np.diag([lam, 1.0, 1.0]), L2)
    h = 1e-6
    for i in range(3):
        up, dn = np.ones(3), np.ones(3)
        up[0] = dn[0] = lam
        up[i] += h
        dn[i] -= h
        d = (psi_closed_form(up, *L2.as_array()) - psi_closed_form(dn, *L2.as_array())) / (2 * h)
        base = lam if i == 0 else 1.0
        assert sb[i, i] == pytest.approx(2 * base * d, rel=1e-7)


def test_second_pk_stress_free_grown_state(rng):
    ug = random_spd(rng)
    c = ug @ ug
    assert np.abs(en.second_pk(c, ug, L2)).max() < 1e-13


def test_second_pk_stripe_stretch():
    s = en.second_pk(np.diag([1.0037114, 1.0, 1.0]), np.eye(3), L2)
    # 40-digit evaluation of the closed form
    assert s[0, 0] == pytest.approx(0.0035991146279228333, rel=1e-9)
    assert s[1, 1] == pytest.approx(-0.00064741458449255192, rel=1e-9)
    assert s[0, 0] > 0


def test_stress_jvp_matches_differences(rng):
    ce = random_spd(rng)
    dce = rng.normal(size=(1, 3, 3))
    dce = 0.5 * (dce + np.swapaxes(dce, 1, 2))
    dw = rng.normal(size=(1, 4))
    spec, _, _ = en.stress_terms(ce, L2)
    dsb, dh = en.stress_jvp(spec, L2, dce, dw)
    h = 1e-6

    def at(t):
        w = en.EnergyWeights(*(L2.as_array() + t * dw[0]))
        return en.driving_force(ce + t * dce[0], w), en.dpsi_dce(ce + t * dce[0], w)

    (sp, hp), (sm, hm) = at(h), at(-h)
    np.testing.assert_allclose(dsb[0], (sp - sm) / (2 * h), atol=1e-8)
    np.testing.assert_allclose(dh[0], (hp - hm) / (2 * h), atol=1e-8)


def test_moduli_of_l2_stripe_weights():
    k, mu, e, nu = en.moduli(L2)
    assert e == pytest.approx(1.79504, rel=1e-3)
    assert nu == pytest.approx(-0.2189, rel=1e-3)
    # 40-digit evaluation
    assert e == pytest.approx(1.7950490737168164, rel=1e-13)
    assert nu == pytest.approx(-0.21890489150645278, rel=1e-13)


def test_zero_shear_limit():
    ew, _ = presets.discovered_weights("stripe", "L1")
    k, mu, e, nu = en.moduli(ew)
    assert mu == 0.0 and e == 0.0 and nu == 0.5 and k > 0


def test_degenerate_moduli():
    with pytest.raises(DegenerateMaterialError):
        en.moduli(en.EnergyWeights(0.0, 0.0, 0.0, 0.0))


def test_linearized_hessian_identity(rng):
    h = 1e-4
    for _ in range(20):
        w = en.EnergyWeights(rng.uniform(0, 3), rng.uniform(0, 1), rng.uniform(-4, 4), rng.uniform(0, 1))
        k, mu, _, _ = en.moduli(w)
        ref = (k - 2 * mu / 3) + 2 * mu * np.eye(3)

        def f(xi):
            return psi_closed_form(np.asarray(xi) ** 2, *w.as_array())

        hess = np.zeros((3, 3))
        for i in range(3):
            for j in range(3):
                acc = 0.0
                for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                    xi = np.ones(3)
                    xi[i] += si * h
                    xi[j] += sj * h
                    acc += si * sj * f(xi)
                hess[i, j] = acc / (4 * h * h)
        assert np.linalg.norm(hess - ref) <= 1e-4 * np.linalg.norm(ref)


def test_volumetric_growth_probes(rng):
    for _ in range(50):
        w = en.EnergyWeights(rng.uniform(1, 3), rng.uniform(0.01, 1), rng.uniform(-4, 4), rng.uniform(0, 1))
        big = en.psi(1e2 * np.eye(3), w)
        assert big >= 1e3 * w.w02
        small = [en.psi(j ** (1 / 3) * np.eye(3), w) for j in (1e-2, 1e-4, 1e-6)]
        assert small[0] < small[1] < small[2]
        assert small[2] > 10.0 * w.w02


def test_tensor_invariance_of_spectral_derivative(rng):
    # a rotated input gives the rotated derivative
    ce = random_spd(rng)
    q = random_rotation(rng)
    a = en.dpsi_dce(q @ ce @ q.T, L2)
    b = q @ en.dpsi_dce(ce, L2) @ q.T
    np.testing.assert_allclose(a, b, atol=1e-12)
    assert tc.tr(a) == pytest.approx(tc.tr(b), abs=1e-12)
