"""Helmholtz free-energy network and the stresses derived from it.

The energy is a function of the co-rotated elastic right Cauchy-Green
tensor ``ce`` with eigenvalues ``lam`` and ``J = det(ce)``::

    psi = w02 * (J**w01 - 1 - w01 * ln J)
        + w12 * (mu_1**w11 + mu_2**w11 + mu_3**w11 - 3),   mu_j = J**(-1/3) lam_j

Every stress-like output is assembled spectrally from the scalars
``g_i = lam_i * dpsi/dlam_i``, which have the closed form::

    g_i = w02 * w01 * (J**w01 - 1) + w12 * w11 * (mu_i**w11 - m / 3),
    m = sum_j mu_j**w11
"""

from __future__ import annotations

from dataclasses import astuple, dataclass
from typing import NamedTuple

import numpy as np

from . import tensor_core as tc
from .errors import DegenerateMaterialError, DomainError

ENERGY_WEIGHT_NAMES = ("w01", "w02", "w11", "w12")


@dataclass(frozen=True)
class EnergyWeights:
    """Weights of the energy network.

    ``w01`` is the volumetric exponent, ``w02`` the volumetric scale,
    ``w11`` the Ogden exponent (any sign) and ``w12`` the isochoric scale.
    """

    w01: float
    w02: float
    w11: float
    w12: float

    def __post_init__(self):
        for name in ENERGY_WEIGHT_NAMES:
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, value)
        for name in ("w01", "w02", "w12"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)


class Moduli(NamedTuple):
    kappa: float
    mu: float
    E: float
    nu: float


class _Terms(NamedTuple):
    spec: tc.Spectral3
    g: np.ndarray          # lam_i dpsi/dlam_i
    dg_dlog: np.ndarray    # d g_i / d ln lam_j
    dg_dw: np.ndarray      # d g_i / d w, shape (4, 3)


def _spectrum(ce) -> tc.Spectral3:
    spec = tc.eig_sym(ce)
    if not spec.values[-1] > 0.0:
        raise DomainError(f"ce is not SPD (smallest eigenvalue {spec.values[-1]:.6g})")
    return spec


def _terms(spec: tc.Spectral3, w: EnergyWeights) -> _Terms:
    a, b = w.w01, w.w11
    loglam = np.log(spec.values)
    logj = loglam.sum()
    ja = np.exp(a * logj)
    logmu = loglam - logj / 3.0
    mub = np.exp(b * logmu)
    m = mub.sum()
    g = w.w02 * a * (ja - 1.0) + w.w12 * b * (mub - m / 3.0)

    dg_dlog = w.w02 * a * a * ja + w.w12 * b * b * (
        np.diag(mub) - mub[:, None] / 3.0 - mub[None, :] / 3.0 + m / 9.0
    )

    mlog = np.dot(mub, logmu)
    dg_dw = np.empty((4, 3))
    dg_dw[0] = w.w02 * ((ja - 1.0) + a * ja * logj)
    dg_dw[1] = a * (ja - 1.0)
    dg_dw[2] = w.w12 * ((mub - m / 3.0) + b * (mub * logmu - mlog / 3.0))
    dg_dw[3] = b * (mub - m / 3.0)
    return _Terms(spec, g, dg_dlog, dg_dw)


def psi(ce, w: EnergyWeights) -> float:
    """Free energy of ``ce``.

    Raises
    ------
    DomainError
        If ``ce`` is not SPD.
    """
    spec = _spectrum(ce)
    loglam = np.log(spec.values)
    logj = loglam.sum()
    vol = w.w02 * (np.expm1(w.w01 * logj) - w.w01 * logj)
    iso = w.w12 * np.sum(np.expm1(w.w11 * (loglam - logj / 3.0)))
    return float(vol + iso)


def dpsi_dce(ce, w: EnergyWeights) -> np.ndarray:
    """Gradient of :func:`psi` with respect to ``ce`` (symmetric)."""
    t = _terms(_spectrum(ce), w)
    return t.spec.compose(t.g / t.spec.values)


def driving_force(ce, w: EnergyWeights) -> np.ndarray:
    """Mandel-type driving force ``2 ce dpsi/dce``; coaxial with ``ce``."""
    t = _terms(_spectrum(ce), w)
    return t.spec.compose(2.0 * t.g)


def second_pk(c, ug, w: EnergyWeights) -> np.ndarray:
    """Second Piola-Kirchhoff stress ``2 ug^-1 dpsi/dce ug^-1`` with
    ``ce = ug^-1 c ug^-1``."""
    ui = tc.inv_spd(ug)
    ce = tc.congruence(ui, c)
    return tc.congruence(ui, 2.0 * dpsi_dce(ce, w))


def stress_terms(ce, w: EnergyWeights):
    """Return ``(spec, driving_force, dpsi_dce)`` sharing one eigendecomposition."""
    t = _terms(_spectrum(ce), w)
    return t.spec, t.spec.compose(2.0 * t.g), t.spec.compose(t.g / t.spec.values)


def stress_jvp(spec: tc.Spectral3, w: EnergyWeights, dce, dw=None):
    """Tangents of ``(driving_force, dpsi_dce)``.

    ``dce`` has shape ``(k, 3, 3)``; ``dw`` (optional) has shape ``(k, 4)``
    in the order of :data:`ENERGY_WEIGHT_NAMES`.
    """
    t = _terms(spec, w)
    lam = spec.values
    jac_sigma = 2.0 * t.dg_dlog / lam[None, :]
    jac_h = t.dg_dlog / (lam[:, None] * lam[None, :]) - np.diag(t.g / lam**2)
    dv_sigma = dv_h = None
    if dw is not None:
        dgw = np.asarray(dw) @ t.dg_dw
        dv_sigma = 2.0 * dgw
        dv_h = dgw / lam[None, :]
    d_sigma = tc.spectral_jvp(spec, 2.0 * t.g, jac_sigma, dce, dv_sigma)
    d_h = tc.spectral_jvp(spec, t.g / lam, jac_h, dce, dv_h)
    return d_sigma, d_h


def driving_force_jvp(spec: tc.Spectral3, w: EnergyWeights, dce) -> np.ndarray:
    """Tangent of :func:`driving_force` only, shape ``(k, 3, 3)``."""
    t = _terms(spec, w)
    return tc.spectral_jvp(spec, 2.0 * t.g, 2.0 * t.dg_dlog / spec.values[None, :], dce)


def moduli(w: EnergyWeights) -> Moduli:
    """Linearized bulk/shear moduli and the derived Young's modulus and
    Poisson ratio.

    Raises
    ------
    DegenerateMaterialError
        If ``3 kappa + mu == 0`` (all relevant weights zero).
    """
    kappa = 4.0 * w.w02 * w.w01**2
    mu = 2.0 * w.w12 * w.w11**2
    denom = 3.0 * kappa + mu
    if denom == 0.0:
        raise DegenerateMaterialError("3*kappa + mu = 0: no elastic stiffness")
    return Moduli(kappa, mu, 9.0 * kappa * mu / denom, (3.0 * kappa - 2.0 * mu) / (2.0 * denom))
