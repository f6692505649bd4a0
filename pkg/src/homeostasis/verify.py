"""Seeded invariant suite behind ``homeostasis verify``.

Every check draws its own samples from a generator seeded with the run seed,
evaluates a violation measure per sample and compares the largest one with a
tolerance. A check passes when ``max_violation <= tolerance``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import energy_net as en
from . import material_point as mp
from . import potential_net as pn
from . import presets
from . import tensor_core as tc

_I3 = np.eye(3)


@dataclass(frozen=True)
class CheckResult:
    name: str
    module: str
    count: int
    max_violation: float
    tolerance: float
    seconds: float = 0.0
    note: str = ""

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_violation) and self.max_violation <= self.tolerance)


# --- samplers -------------------------------------------------------------

def random_sym(rng, scale=1.0) -> np.ndarray:
    a = rng.normal(size=(3, 3)) * scale
    return 0.5 * (a + a.T)


def random_rotation(rng) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_spd(rng, log_cond=np.log(1e6), spread=0.3) -> np.ndarray:
    """SPD tensor with log-eigenvalues spanning at most ``log_cond``."""
    logs = rng.uniform(-0.5, 0.5, 3) * log_cond if spread is None else rng.normal(0.0, spread, 3)
    q = random_rotation(rng)
    return tc.congruence(_I3, (q * np.exp(logs)) @ q.T)


def random_energy_weights(rng) -> en.EnergyWeights:
    return en.EnergyWeights(
        rng.uniform(0.0, 3.0), rng.uniform(0.0, 1.0), rng.uniform(-4.0, 4.0), rng.uniform(0.0, 1.0)
    )


def random_potential_weights(rng, mode=pn.ActivationMode.NEG_MAX) -> pn.PotentialWeights:
    w = rng.uniform(0.0, 1.0, 9)
    w[[2, 6]] = rng.uniform(0.0, 2.0, 2)
    return pn.PotentialWeights.from_array(w, mode)


def _rel(a, b) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


# --- tensor_core ----------------------------------------------------------------

def check_reconstruction(rng, n=1000):
    worst = 0.0
    for _ in range(n):
        a = random_sym(rng, 10.0 ** rng.uniform(-3, 3))
        s = tc.eig_sym(a)
        worst = max(worst, _rel(s.compose(s.values), a))
    return n, worst


def check_projections(rng, n=1000):
    worst = 0.0
    for _ in range(n):
        p = tc.eig_sym(random_sym(rng)).projections
        worst = max(worst, float(np.abs(p.sum(axis=0) - _I3).max()))
        for i in range(3):
            worst = max(worst, float(np.abs(p[i] @ p[i] - p[i]).max()), float(np.abs(p[i] - p[i].T).max()))
            for j in range(i + 1, 3):
                worst = max(worst, float(np.abs(p[i] @ p[j]).max()))
    return n, worst


def check_characteristic(rng, n=1000):
    worst = 0.0
    for _ in range(n):
        a = random_sym(rng, 10.0 ** rng.uniform(-2, 2))
        lam = tc.eig_sym(a).values
        ref = np.array(tc.invariants(a))
        got = np.array([lam.sum(), lam[0] * lam[1] + lam[0] * lam[2] + lam[1] * lam[2], lam.prod()])
        scale = np.array([1.0, 2.0, 3.0])
        norm = np.linalg.norm(a)
        worst = max(worst, float(np.max(np.abs(got - ref) / norm**scale)))
    return n, worst


def check_exp_det(rng, n=1000):
    worst = 0.0
    for _ in range(n):
        a = random_sym(rng)
        a *= rng.uniform(0.0, 5.0) / np.linalg.norm(a)
        ref = np.exp(tc.tr(a))
        worst = max(worst, abs(tc.det(tc.exp_sym(a)) - ref) / ref)
    return n, worst


def check_exp_inverse(rng, n=1000):
    worst = 0.0
    for _ in range(n):
        a = random_sym(rng)
        a *= rng.uniform(0.0, 5.0) / np.linalg.norm(a)
        worst = max(worst, float(np.linalg.norm(tc.exp_sym(a) @ tc.exp_sym(-a) - _I3)))
    return n, worst


def check_sqrt(rng, n=1000):
    worst = 0.0
    for _ in range(n):
        a = random_spd(rng, spread=None)
        r = tc.sqrt_spd(a)
        worst = max(worst, _rel(r @ r, a))
    return n, worst


# --- energy_net -----------------------------------------------------------------

def check_energy_normalization(rng, n=100):
    worst = 0.0
    for _ in range(n):
        w = random_energy_weights(rng)
        worst = max(worst, abs(en.psi(_I3, w)), float(np.abs(en.dpsi_dce(_I3, w)).max()),
                    float(np.abs(en.second_pk(_I3, _I3, w)).max()))
    return n, worst


def check_energy_isotropy(rng, n=100):
    worst = 0.0
    for _ in range(n):
        w = random_energy_weights(rng)
        ce = random_spd(rng)
        q = random_rotation(rng)
        ref = en.psi(ce, w)
        worst = max(worst, abs(en.psi(q @ ce @ q.T, w) - ref) / max(1.0, abs(ref)))
    return n, worst


def check_volumetric_growth(rng, n=100):
    """Large-volume probe at 1e6 must exceed 1e3*w02; small-volume probe at
    1e-6 must exceed the 1e-3 probe (the energy grows only like ``-w01 ln J``
    as ``J -> 0``)."""
    worst = 0.0
    for _ in range(n):
        w = en.EnergyWeights(rng.uniform(1.0, 3.0), rng.uniform(0.01, 1.0), rng.uniform(-4, 4), rng.uniform(0, 1))
        probe = {j: en.psi(j ** (1.0 / 3.0) * _I3, w) for j in (1e-6, 1e-3, 1e6)}
        big = 1e3 * w.w02 - (probe[1e6] - en.psi(_I3, w))
        small = probe[1e-3] - probe[1e-6]
        worst = max(worst, big / w.w02, small / w.w02)
    return n, worst


def _fd_gradient(f, x, h=1e-6):
    g = np.zeros((3, 3))
    for i, j in ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)):
        d = np.zeros((3, 3))
        d[i, j] = d[j, i] = h
        val = (f(x + d) - f(x - d)) / (2.0 * h)
        if i == j:
            g[i, i] = val
        else:
            g[i, j] = g[j, i] = 0.5 * val
    return g


def check_energy_derivative(rng, n=100):
    worst = 0.0
    for _ in range(n):
        w = random_energy_weights(rng)
        ce = random_spd(rng)
        ref = _fd_gradient(lambda x: en.psi(x, w), ce)
        worst = max(worst, _rel(en.dpsi_dce(ce, w), ref))
    return n, worst


def check_linearized_moduli(rng, n=50):
    worst = 0.0
    h = 1e-4
    for _ in range(n):
        w = random_energy_weights(rng)
        k, mu, _, _ = en.moduli(w)
        ref = (k - 2.0 * mu / 3.0) + 2.0 * mu * _I3

        def f(xi):
            return en.psi(np.diag(np.asarray(xi) ** 2), w)

        hess = np.zeros((3, 3))
        for i in range(3):
            for j in range(3):
                acc = 0.0
                for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                    xi = np.ones(3)
                    xi[i] += si * h
                    xi[j] += sj * h
                    acc += si * sj * f(xi)
                hess[i, j] = acc / (4.0 * h * h)
        worst = max(worst, _rel(hess, ref))
    return n, worst


# --- potential_net ----------------------------------------------------------------

def _sigma(rng):
    return random_sym(rng, 10.0 ** rng.uniform(-1, 1.5))


def _modes(rng):
    return pn.ActivationMode.ABS if rng.random() < 0.5 else pn.ActivationMode.NEG_MAX


def check_potential_nonneg(rng, n=10_000):
    worst = 0.0
    for k in range(n):
        w = random_potential_weights(rng, _modes(rng))
        if k % 100 == 0:
            worst = max(worst, abs(pn.phi_hat(np.zeros((3, 3)), w)))
        worst = max(worst, -pn.phi_hat(_sigma(rng), w))
    return n, worst


def check_potential_convexity(rng, n=1000):
    worst = 0.0
    for _ in range(n):
        w = random_potential_weights(rng, _modes(rng))
        a, b = _sigma(rng), _sigma(rng)
        fa, fb = pn.phi_hat(a, w), pn.phi_hat(b, w)
        for t in (0.25, 0.5, 0.75):
            worst = max(worst, pn.phi_hat(t * a + (1 - t) * b, w) - (t * fa + (1 - t) * fb))
    return 3 * n, worst


def check_dissipation_inequality(rng, n=10_000):
    worst = 0.0
    for _ in range(n):
        w = random_potential_weights(rng, _modes(rng))
        s = _sigma(rng)
        worst = max(worst, pn.phi_hat(s, w) - float(np.sum(pn.dphihat_dsigma(s, w) * s)))
    return n, worst


def check_potential_isotropy(rng, n=1000):
    worst = 0.0
    for _ in range(n):
        w = random_potential_weights(rng, _modes(rng))
        s = _sigma(rng)
        q = random_rotation(rng)
        ref = pn.phi_hat(s, w)
        worst = max(worst, abs(pn.phi_hat(q @ s @ q.T, w) - ref) / max(1.0, abs(ref)))
    return n, worst


def check_shear_neurons(rng, n=10_000):
    worst = 0.0
    for _ in range(n):
        tau = pn.principal_state(_sigma(rng)).tau
        worst = max(
            worst,
            float(np.abs(pn.neg_neuron(tau, pn.ActivationMode.NEG_MAX)).max()),
            float(np.abs(pn.pos_neuron(tau) - tau).max()),
            float(np.abs(pn.neg_neuron(tau, pn.ActivationMode.ABS) - pn.pos_neuron(tau)).max()),
            float(max(0.0, -tau.min())),
        )
    return n, worst


def check_shear_trace_free(rng, n=1000):
    worst = 0.0
    for _ in range(n):
        w = random_potential_weights(rng, _modes(rng))
        w = pn.PotentialWeights(0, 0, w.ws3, 0, w.wt1, w.wt2, w.wt3, w.wt4, w.weta, w.activation_mode)
        worst = max(worst, abs(tc.tr(pn.dphihat_dsigma(_sigma(rng), w))))
    return n, worst


# --- material_point -----------------------------------------------------------------

def _shear_only_weights(rng):
    ew = en.EnergyWeights(1.2, 0.07, 1.2, 0.4)
    pw = pn.PotentialWeights(
        0.0, 0.0, 0.0, 0.0, 0.0, rng.uniform(0.01, 0.05), rng.uniform(0.1, 1.0),
        rng.uniform(0.02, 0.05), rng.uniform(0.1, 0.5),
    )
    return ew, pw


def check_determinant_preservation(rng, n_steps=200):
    ew, pw = _shear_only_weights(rng)
    times = np.arange(n_steps + 1) * 0.1
    c = np.ones((times.size, 3))
    c[times > 5.0, 0] = 1.01
    tr = mp.simulate(mp.LoadingProtocol(times, c, presets.STRIPE_MASK), ew, pw)
    d = tr.det_cg
    return n_steps, float(np.abs(d / d[0] - 1.0).max())


def check_spd_preservation(rng, n=None):
    worst = 0.0
    count = 0
    for spec, proto in (("stripe", presets.stripe_protocol()), ("cross", presets.cross_protocol())):
        ew, pw = presets.discovered_weights(spec, "L2")
        for s in mp.simulate(proto, ew, pw).states:
            lam = tc.eig_sym(s.cg).values
            worst = max(worst, float(max(0.0, -lam[-1])), _rel(s.ug @ s.ug, s.cg))
            count += 1
    return count, worst


def check_residual(rng, n=None):
    worst = 0.0
    count = 0
    for spec, proto in (("stripe", presets.stripe_protocol()), ("cross", presets.cross_protocol())):
        for reg in ("L1", "L2"):
            ew, pw = presets.discovered_weights(spec, reg)
            r = mp.simulate(proto, ew, pw).residuals[1:]
            worst = max(worst, float(np.abs(r).max()) / mp.DEFAULT_EPS)
            count += r.size
    return count, worst


def check_steady_state(rng, n=None):
    """Constant ``C = I`` for 40 h: terminal |gamma_hat| against its peak and
    monotone approach of ``phi_hat`` to 1."""
    ew, pw = presets.discovered_weights("stripe", "L2")
    tr = mp.simulate(presets.stripe_protocol(None, t_end=40.0), ew, pw)
    g = np.abs(tr.gamma_hat[1:])
    dist = np.abs(tr.phi_hat[1:] - 1.0)
    ratio = g[-1] / g.max() / 1e-4
    mono = float(max(0.0, np.diff(dist).max())) / 1e-12
    return g.size, max(ratio, mono)


def check_rate_independent(rng, n=None):
    ew, pw = presets.discovered_weights("stripe", "L2")
    pw = pn.PotentialWeights(*pw.as_array()[:8], 0.0)
    tr = mp.simulate(presets.stripe_protocol(t_end=30.0), ew, pw)
    return len(tr) - 1, float(np.abs(tr.phi_hat[1:] - 1.0).max()) / mp.DEFAULT_EPS


def check_dissipation_sign(rng, n=None):
    """``sigma_bar_n : flow_n >= 0`` so that the growth power has the sign of
    ``gamma_hat``."""
    worst = 0.0
    count = 0
    for spec in ("stripe", "stripe_abs"):
        ew, pw = presets.discovered_weights(spec, "L2")
        tr = mp.simulate(presets.stripe_protocol(), ew, pw)
        for r in tr.results[:-1]:
            flow = pn.dphihat_dsigma(r.sigma_bar, pw)
            worst = max(worst, -float(np.sum(r.sigma_bar * flow)))
            count += 1
    return count, worst


@dataclass(frozen=True)
class Check:
    name: str
    module: str
    func: Callable
    tolerance: float
    note: str = ""


CHECKS: tuple[Check, ...] = (
    Check("eig_reconstruction", "tensor_core", check_reconstruction, 1e-12),
    Check("eig_projections", "tensor_core", check_projections, 1e-12),
    Check("eig_characteristic_polynomial", "tensor_core", check_characteristic, 1e-10),
    Check("exp_determinant", "tensor_core", check_exp_det, 1e-10),
    Check("exp_inverse", "tensor_core", check_exp_inverse, 1e-10),
    Check("sqrt_square", "tensor_core", check_sqrt, 1e-12),
    Check("energy_normalization", "energy_net", check_energy_normalization, 0.0),
    Check("energy_isotropy", "energy_net", check_energy_isotropy, 1e-10),
    Check("energy_volumetric_growth", "energy_net", check_volumetric_growth, 0.0,
          "violation in units of w02; <= 0 passes"),
    Check("energy_derivative_fd", "energy_net", check_energy_derivative, 1e-6),
    Check("linearized_moduli_hessian", "energy_net", check_linearized_moduli, 1e-4),
    Check("potential_nonnegative", "potential_net", check_potential_nonneg, 0.0),
    Check("potential_convexity", "potential_net", check_potential_convexity, 1e-10),
    Check("potential_dissipation_inequality", "potential_net", check_dissipation_inequality, 1e-10),
    Check("potential_isotropy", "potential_net", check_potential_isotropy, 1e-10),
    Check("shear_neuron_degeneracy", "potential_net", check_shear_neurons, 0.0),
    Check("shear_flow_trace_free", "potential_net", check_shear_trace_free, 1e-14),
    Check("determinant_preservation", "material_point", check_determinant_preservation, 1e-12),
    Check("spd_preservation", "material_point", check_spd_preservation, 1e-12),
    Check("homeostatic_residual", "material_point", check_residual, 1.0, "in units of eps"),
    Check("steady_state_homeostasis", "material_point", check_steady_state, 1.0,
          "max of |g_end|/(1e-4 |g|_max) and monotonicity slack/1e-12"),
    Check("rate_independent_limit", "material_point", check_rate_independent, 1.0, "in units of eps"),
    Check("dissipation_sign", "material_point", check_dissipation_sign, 1e-12),
)


def run_checks(seed: int = 0, names=None) -> list[CheckResult]:
    """Run the suite (or the named subset); each check gets its own stream."""
    out = []
    for k, check in enumerate(CHECKS):
        if names is not None and check.name not in names:
            continue
        rng = np.random.default_rng([seed, k])
        t0 = time.perf_counter()
        try:
            count, worst = check.func(rng)
            note = check.note
        except Exception as exc:  # a crash is a failed check, not a crashed report
            count, worst, note = 0, float("inf"), f"raised {type(exc).__name__}: {exc}"
        out.append(CheckResult(check.name, check.module, int(count), float(worst), check.tolerance,
                               time.perf_counter() - t0, note))
    return out


def format_report(results: list[CheckResult], seed: int) -> str:
    lines = [f"# invariant suite, seed={seed}", "status,module,check,count,max_violation,tolerance,seconds,note"]
    for r in results:
        lines.append(
            f"{'PASS' if r.passed else 'FAIL'},{r.module},{r.name},{r.count},"
            f"{r.max_violation:.3e},{r.tolerance:.1e},{r.seconds:.2f},{r.note}"
        )
    n_pass = sum(r.passed for r in results)
    lines.append(f"# {n_pass}/{len(results)} checks passed")
    return "\n".join(lines) + "\n"
