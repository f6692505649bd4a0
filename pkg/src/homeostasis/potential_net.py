"""Scaled pseudo-potential network of the homeostatic surface.

With ordered principal values ``s1 >= s2 >= s3`` of the driving force and the
principal shear stresses ``t = ((s1 - s3)/2, (s1 - s2)/2, (s2 - s3)/2)``::

    phi_hat = ws1 * sum neg(s_i) + ws2 * sum lncosh(ws3 * s_i) + ws4 * sum max(s_i, 0)
            + wt1 * sum neg(t_i) + wt2 * sum lncosh(wt3 * t_i) + wt4 * sum max(t_i, 0)

where ``neg`` is ``max(-x, 0)`` (``NEG_MAX``) or ``abs(x)`` (``ABS``).

Kinks use the active-branch convention of common autodiff frameworks:
``d/dx max(x, 0) = 1`` and ``d/dx max(-x, 0) = -1`` at ``x = 0``, and
``d/dx abs(x) = 0`` at ``x = 0``. With this choice a stress-free virgin state
still has a non-zero flow direction, which is what lets tension build up from
``C = I``. Derivatives are assigned per eigenvector, so ties follow the
eigenbasis order of :func:`tensor_core.eig_sym`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import tensor_core as tc

POTENTIAL_WEIGHT_NAMES = ("ws1", "ws2", "ws3", "ws4", "wt1", "wt2", "wt3", "wt4", "weta")

# tau = _T @ sigma for descending sigma
_T = np.array([[0.5, 0.0, -0.5], [0.5, -0.5, 0.0], [0.0, 0.5, -0.5]])
_LN2 = np.log(2.0)


class ActivationMode(str, enum.Enum):
    NEG_MAX = "neg_max"
    ABS = "abs"


@dataclass(frozen=True)
class PotentialWeights:
    """Weights of the pseudo-potential network.

    ``ws*`` act on principal stresses, ``wt*`` on principal shear stresses;
    ``*3`` are the inner weights of the ln-cosh neurons. ``weta`` is the scaled
    relaxation weight entering the residual only. In ``ABS`` mode ``ws1`` and
    ``wt1`` scale the ``abs`` neurons. There is no separate homeostatic
    stress: it is the stress level at which ``phi_hat`` reaches 1.
    """

    ws1: float = 0.0
    ws2: float = 0.0
    ws3: float = 0.0
    ws4: float = 0.0
    wt1: float = 0.0
    wt2: float = 0.0
    wt3: float = 0.0
    wt4: float = 0.0
    weta: float = 0.0
    activation_mode: ActivationMode = ActivationMode.NEG_MAX

    def __post_init__(self):
        for name in POTENTIAL_WEIGHT_NAMES:
            value = float(getattr(self, name))
            if not np.isfinite(value) or value < 0.0:
                raise ValueError(f"{name} must be finite and >= 0, got {value}")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "activation_mode", ActivationMode(self.activation_mode))

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in POTENTIAL_WEIGHT_NAMES])

    @classmethod
    def from_array(cls, values, activation_mode=ActivationMode.NEG_MAX) -> PotentialWeights:
        return cls(*(float(v) for v in values), activation_mode=activation_mode)


class PrincipalStressState(NamedTuple):
    sigma: np.ndarray       # s1 >= s2 >= s3
    tau: np.ndarray         # (t1, t2, t3), all >= 0
    spec: tc.Spectral3

    @property
    def projections(self) -> np.ndarray:
        return self.spec.projections


def principal_state(sigma_bar) -> PrincipalStressState:
    spec = tc.eig_sym(sigma_bar)
    s = spec.values
    tau = np.maximum(_T @ s, 0.0)
    return PrincipalStressState(s, tau, spec)


def lncosh(y):
    """``ln(cosh(y))`` without overflow for large ``|y|``."""
    a = np.abs(y)
    return a + np.log1p(np.exp(-2.0 * a)) - _LN2


def neg_neuron(x, mode: ActivationMode):
    x = np.asarray(x, dtype=float)
    if mode is ActivationMode.ABS:
        return np.abs(x)
    return np.maximum(-x, 0.0)


def d_neg_neuron(x, mode: ActivationMode):
    x = np.asarray(x, dtype=float)
    if mode is ActivationMode.ABS:
        return np.sign(x)
    return -(x <= 0.0).astype(float)


def pos_neuron(x):
    return np.maximum(np.asarray(x, dtype=float), 0.0)


def d_pos_neuron(x):
    return (np.asarray(x, dtype=float) >= 0.0).astype(float)


def activations(x: float, mode: ActivationMode = ActivationMode.NEG_MAX, inner_weight: float = 1.0):
    """Per-neuron values ``(neg, lncosh, pos)`` for one scalar input."""
    mode = ActivationMode(mode)
    return (
        float(neg_neuron(x, mode)),
        float(lncosh(inner_weight * x)),
        float(pos_neuron(x)),
    )


def _family(x, w_neg, w_lc, w_in, w_pos, mode):
    """Value, first and second derivative per entry of one neuron family."""
    y = w_in * x
    th = np.tanh(y)
    val = w_neg * neg_neuron(x, mode) + w_lc * lncosh(y) + w_pos * pos_neuron(x)
    d1 = w_neg * d_neg_neuron(x, mode) + w_lc * w_in * th + w_pos * d_pos_neuron(x)
    d2 = w_lc * w_in * w_in * (1.0 - th * th)
    return val, d1, d2


def _sigma_derivatives(s, tau, w: PotentialWeights):
    mode = w.activation_mode
    vs, ds, hs = _family(s, w.ws1, w.ws2, w.ws3, w.ws4, mode)
    vt, dt, ht = _family(tau, w.wt1, w.wt2, w.wt3, w.wt4, mode)
    value = float(vs.sum() + vt.sum())
    grad = ds + _T.T @ dt
    hess = np.diag(hs) + _T.T @ (ht[:, None] * _T)
    return value, grad, hess


def phi_hat(sigma_bar, w: PotentialWeights) -> float:
    """Scaled pseudo potential; zero at zero and non-negative."""
    p = principal_state(sigma_bar)
    return _sigma_derivatives(p.sigma, p.tau, w)[0]


def dphihat_dsigma(sigma_bar, w: PotentialWeights) -> np.ndarray:
    """Flow direction ``d phi_hat / d sigma_bar``; coaxial with ``sigma_bar``."""
    p = principal_state(sigma_bar)
    _, grad, _ = _sigma_derivatives(p.sigma, p.tau, w)
    return p.spec.compose(grad)


def potential_terms(sigma_bar, w: PotentialWeights):
    """Return ``(state, phi_hat, flow)`` sharing one eigendecomposition."""
    p = principal_state(sigma_bar)
    value, grad, _ = _sigma_derivatives(p.sigma, p.tau, w)
    return p, value, p.spec.compose(grad)


def _weight_partials(s, tau, w: PotentialWeights):
    """``d phi_hat / d w`` (9,) and ``d grad_i / d w`` (9, 3)."""
    mode = w.activation_mode
    dphi = np.zeros(9)
    dgrad = np.zeros((9, 3))
    for offset, x, w_lc, w_in, to_sigma in (
        (0, s, w.ws2, w.ws3, np.eye(3)),
        (4, tau, w.wt2, w.wt3, _T.T),
    ):
        y = w_in * x
        th = np.tanh(y)
        dphi[offset + 0] = neg_neuron(x, mode).sum()
        dphi[offset + 1] = lncosh(y).sum()
        dphi[offset + 2] = w_lc * np.sum(x * th)
        dphi[offset + 3] = pos_neuron(x).sum()
        dgrad[offset + 0] = to_sigma @ d_neg_neuron(x, mode)
        dgrad[offset + 1] = to_sigma @ (w_in * th)
        dgrad[offset + 2] = to_sigma @ (w_lc * (th + y * (1.0 - th * th)))
        dgrad[offset + 3] = to_sigma @ d_pos_neuron(x)
    return dphi, dgrad


def potential_jvp(state: PrincipalStressState, w: PotentialWeights, dsigma_bar, dw=None):
    """Tangents of ``(phi_hat, flow)``.

    ``dsigma_bar`` has shape ``(k, 3, 3)``; ``dw`` (optional) ``(k, 9)`` in the
    order of :data:`POTENTIAL_WEIGHT_NAMES`.
    """
    spec = state.spec
    _, grad, hess = _sigma_derivatives(state.sigma, state.tau, w)
    v = spec.vectors
    dsig = np.einsum("ai,kab,bi->ki", v, dsigma_bar, v)
    dphi = dsig @ grad
    dvalues = None
    if dw is not None:
        pphi, pgrad = _weight_partials(state.sigma, state.tau, w)
        dw = np.asarray(dw)
        dphi = dphi + dw @ pphi
        dvalues = dw @ pgrad
    dflow = tc.spectral_jvp(spec, grad, hess, dsigma_bar, dvalues)
    return dphi, dflow


def weight_names(mode: ActivationMode) -> tuple[str, ...]:
    """Display names; the first neuron of each family is ``abs`` in ABS mode."""
    if ActivationMode(mode) is ActivationMode.ABS:
        return ("wsABS", "ws2", "ws3", "ws4", "wtABS", "wt2", "wt3", "wt4", "weta")
    return POTENTIAL_WEIGHT_NAMES


__all__ = [
    "ActivationMode",
    "POTENTIAL_WEIGHT_NAMES",
    "PotentialWeights",
    "PrincipalStressState",
    "activations",
    "d_neg_neuron",
    "d_pos_neuron",
    "dphihat_dsigma",
    "lncosh",
    "neg_neuron",
    "phi_hat",
    "pos_neuron",
    "potential_jvp",
    "potential_terms",
    "principal_state",
    "weight_names",
]
