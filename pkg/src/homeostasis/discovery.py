"""Weight discovery from stress-time data.

The optimizer works on an unconstrained vector ``theta`` with one entry per
weight in :data:`material_point.WEIGHT_NAMES`. Non-negative weights are
``w = theta**2``; the sign-free Ogden exponent ``w11`` is ``theta`` itself.
Penalties act on ``w``, not on ``theta``.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .energy_net import EnergyWeights
from .errors import HomeostasisError, NumericalFailure, TrainingAborted
from .material_point import DEFAULT_EPS, N_WEIGHTS, WEIGHT_NAMES, LoadingProtocol, simulate
from .potential_net import ActivationMode, PotentialWeights

log = logging.getLogger(__name__)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-7

SIGN_FREE = ("w11",)
_SQUARED = np.array([name not in SIGN_FREE for name in WEIGHT_NAMES])
_ETA = WEIGHT_NAMES.index("weta")


class RegMode(str, enum.Enum):
    L1 = "L1"
    L2 = "L2"
    NONE = "NONE"


DEFAULT_STRENGTH = {RegMode.L1: 0.01, RegMode.L2: 0.001, RegMode.NONE: 0.0}


class GradientMode(str, enum.Enum):
    FORWARD_AD = "FORWARD_AD"
    FINITE_DIFF = "FINITE_DIFF"


class RegFlag(str, enum.Enum):
    REGULARIZED = "REGULARIZED"
    FREE = "FREE"


_FREE = ("w01", "w11", "ws3", "wt3")


@dataclass(frozen=True)
class RegMask:
    """Per-weight regularization flags in :data:`WEIGHT_NAMES` order."""

    flags: tuple[RegFlag, ...] = tuple(
        RegFlag.FREE if n in _FREE else RegFlag.REGULARIZED for n in WEIGHT_NAMES
    )

    def __post_init__(self):
        flags = tuple(RegFlag(f) for f in self.flags)
        if len(flags) != N_WEIGHTS:
            raise ValueError(f"need {N_WEIGHTS} flags, got {len(flags)}")
        object.__setattr__(self, "flags", flags)

    @property
    def regularized(self) -> np.ndarray:
        return np.array([f is RegFlag.REGULARIZED for f in self.flags])


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and regularization settings.

    ``reg_strength`` defaults to 0.01 for L1 and 0.001 for L2. ``eta_reg`` is
    the quadratic penalty on ``weta``, applied in every mode. Finite-difference
    gradients re-solve each step to ``fd_eps`` so that the difference quotient
    is not dominated by the Newton tolerance.
    """

    learning_rate: float = 0.001
    epochs: int = 4000
    reg_mode: RegMode = RegMode.L2
    reg_strength: float | None = None
    eta_reg: float = 0.001
    seed: int = 0
    eps: float = DEFAULT_EPS
    gradient_mode: GradientMode = GradientMode.FORWARD_AD
    activation_mode: ActivationMode = ActivationMode.NEG_MAX
    fd_eps: float = 1e-13
    reg_mask: RegMask = field(default_factory=RegMask)

    def __post_init__(self):
        if not self.learning_rate > 0.0:
            raise ValueError("learning_rate must be > 0")
        if int(self.epochs) < 1:
            raise ValueError("epochs must be >= 1")
        object.__setattr__(self, "epochs", int(self.epochs))
        object.__setattr__(self, "reg_mode", RegMode(self.reg_mode))
        object.__setattr__(self, "gradient_mode", GradientMode(self.gradient_mode))
        object.__setattr__(self, "activation_mode", ActivationMode(self.activation_mode))
        if self.reg_strength is None:
            object.__setattr__(self, "reg_strength", DEFAULT_STRENGTH[self.reg_mode])
        if self.reg_strength < 0.0 or self.eta_reg < 0.0:
            raise ValueError("penalty strengths must be >= 0")
        if not self.eps > 0.0:
            raise ValueError("eps must be > 0")


@dataclass(frozen=True)
class Experiment:
    """One loading protocol with its measured stresses.

    ``stresses`` has shape ``(n, 3)``; columns flagged zero-stress are ignored.
    """

    protocol: LoadingProtocol
    stresses: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.stresses, dtype=float)
        if s.shape != (len(self.protocol), 3):
            raise ValueError(
                f"stresses must have shape ({len(self.protocol)}, 3) to match the protocol, got {s.shape}"
            )
        if not np.all(np.isfinite(s[:, self.protocol.measured])):
            raise ValueError("measured stresses must be finite")
        object.__setattr__(self, "stresses", s)


@dataclass(frozen=True)
class Dataset:
    experiments: tuple[Experiment, ...]

    def __post_init__(self):
        exps = tuple(self.experiments)
        if not exps:
            raise ValueError("dataset needs at least one experiment")
        object.__setattr__(self, "experiments", exps)

    @property
    def n_entries(self) -> int:
        return int(sum(len(e.protocol) * e.protocol.measured.sum() for e in self.experiments))


@dataclass
class LossReport:
    """Per-epoch loss history; ``total = data + penalty`` entry by entry."""

    total: list[float] = field(default_factory=list)
    data: list[float] = field(default_factory=list)
    penalty: list[float] = field(default_factory=list)

    def append(self, data: float, penalty: float) -> None:
        self.data.append(float(data))
        self.penalty.append(float(penalty))
        self.total.append(float(data) + float(penalty))

    def __len__(self) -> int:
        return len(self.total)

    def as_array(self) -> np.ndarray:
        """Columns ``(epoch, total, data, penalty)``."""
        n = len(self.total)
        return np.column_stack([np.arange(1, n + 1), self.total, self.data, self.penalty])


# --- reparameterization -------------------------------------------------

def weights_vector(ew: EnergyWeights, pw: PotentialWeights) -> np.ndarray:
    return np.concatenate([ew.as_array(), pw.as_array()])


def split_weights(w, activation_mode=ActivationMode.NEG_MAX):
    w = np.asarray(w, dtype=float)
    return EnergyWeights(*w[:4]), PotentialWeights.from_array(w[4:], activation_mode)


def constrain(theta, activation_mode=ActivationMode.NEG_MAX):
    """Map unconstrained parameters to ``(EnergyWeights, PotentialWeights)``."""
    theta = np.asarray(theta, dtype=float)
    return split_weights(np.where(_SQUARED, theta * theta, theta), activation_mode)


def unconstrain(ew: EnergyWeights, pw: PotentialWeights) -> np.ndarray:
    """Inverse of :func:`constrain` on the non-negative branch."""
    w = weights_vector(ew, pw)
    return np.where(_SQUARED, np.sqrt(np.abs(w)), w)


def _dw_dtheta(theta: np.ndarray) -> np.ndarray:
    return np.where(_SQUARED, 2.0 * theta, 1.0)


def initial_theta(seed: int) -> np.ndarray:
    """Seeded start: ``theta ~ U[0.05, 0.5]``, ``w11 ~ U[0.5, 1.5]``."""
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.05, 0.5, N_WEIGHTS)
    theta[~_SQUARED] = rng.uniform(0.5, 1.5, int((~_SQUARED).sum()))
    return theta


# --- loss terms -----------------------------------------------------------

def _data_term(ew, pw, dataset: Dataset, eps: float, sensitivities: bool):
    sq = 0.0
    grad = np.zeros(N_WEIGHTS)
    for exp in dataset.experiments:
        tr = simulate(exp.protocol, ew, pw, eps=eps, sensitivities=sensitivities)
        m = exp.protocol.measured
        err = tr.stresses[:, m] - exp.stresses[:, m]
        sq += float(np.sum(err * err))
        if sensitivities:
            grad += 2.0 * np.einsum("nc,ncw->w", err, tr.stress_sensitivities[:, m, :])
    n = dataset.n_entries
    return sq / n, grad / n


def data_loss(ew: EnergyWeights, pw: PotentialWeights, dataset: Dataset, eps: float = DEFAULT_EPS) -> float:
    """Mean squared error over every measured entry of every experiment.

    Raises
    ------
    SimulationError
        If a rollout fails; there is no large-loss substitute.
    """
    return _data_term(ew, pw, dataset, eps, False)[0]


def _penalty_terms(w: np.ndarray, config: TrainConfig):
    reg = config.reg_mask.regularized.copy()
    reg[_ETA] = False
    eta = w[_ETA]
    value = config.eta_reg * eta * eta
    grad = np.zeros(N_WEIGHTS)
    grad[_ETA] = 2.0 * config.eta_reg * eta
    lam = config.reg_strength
    if config.reg_mode is RegMode.L1:
        value += lam * float(np.sum(np.abs(w[reg])))
        grad[reg] += lam * np.sign(w[reg])
    elif config.reg_mode is RegMode.L2:
        value += lam * float(np.sum(w[reg] ** 2))
        grad[reg] += 2.0 * lam * w[reg]
    return float(value), grad


def penalty(ew: EnergyWeights, pw: PotentialWeights, config: TrainConfig) -> float:
    """Regularization on the weight values.

    L1 sums ``|w|`` over the regularized weights other than ``weta``; L2 sums
    ``w**2`` over the same set. ``weta`` always carries ``eta_reg * weta**2``.
    """
    return _penalty_terms(weights_vector(ew, pw), config)[0]


class LossGradient(NamedTuple):
    data: float
    penalty: float
    grad: np.ndarray        # with respect to theta

    @property
    def total(self) -> float:
        return self.data + self.penalty


def _objective(theta, dataset, config, eps) -> tuple[float, float]:
    ew, pw = constrain(theta, config.activation_mode)
    w = weights_vector(ew, pw)
    return data_loss(ew, pw, dataset, eps), _penalty_terms(w, config)[0]


def loss_and_gradient(theta, dataset: Dataset, config: TrainConfig) -> LossGradient:
    """Loss terms and their gradient with respect to ``theta``.

    Raises
    ------
    NumericalFailure
        If a gradient component is not finite (``component`` is its index).
    SimulationError
        If a rollout fails.
    """
    theta = np.asarray(theta, dtype=float)
    ew, pw = constrain(theta, config.activation_mode)
    w = weights_vector(ew, pw)
    pen, pen_grad = _penalty_terms(w, config)
    if config.gradient_mode is GradientMode.FORWARD_AD:
        data, data_grad = _data_term(ew, pw, dataset, config.eps, True)
        grad = (data_grad + pen_grad) * _dw_dtheta(theta)
    else:
        data = data_loss(ew, pw, dataset, config.eps)
        fd_eps = min(config.eps, config.fd_eps)
        grad = np.empty(N_WEIGHTS)
        for j in range(N_WEIGHTS):
            h = 1e-6 * max(1.0, abs(theta[j]))
            tp, tm = theta.copy(), theta.copy()
            tp[j] += h
            tm[j] -= h
            fp = sum(_objective(tp, dataset, config, fd_eps))
            fm = sum(_objective(tm, dataset, config, fd_eps))
            grad[j] = (fp - fm) / (2.0 * h)
    bad = np.flatnonzero(~np.isfinite(grad))
    if bad.size:
        j = int(bad[0])
        raise NumericalFailure(f"non-finite gradient for {WEIGHT_NAMES[j]}", component=j)
    return LossGradient(data, pen, grad)


def gradient(ew: EnergyWeights, pw: PotentialWeights, dataset: Dataset, config: TrainConfig) -> np.ndarray:
    """Gradient of ``data_loss + penalty`` with respect to ``theta`` at the
    non-negative preimage of the given weights."""
    return loss_and_gradient(unconstrain(ew, pw), dataset, config).grad


# --- optimizer ------------------------------------------------------------

class AdamMoments(NamedTuple):
    m: np.ndarray
    v: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> AdamMoments:
        return cls(np.zeros(n), np.zeros(n))


def adam_step(params, grads, moments: AdamMoments, t: int, lr: float = 0.001,
              beta1: float = ADAM_BETA1, beta2: float = ADAM_BETA2, eps_hat: float = ADAM_EPS):
    """One bias-corrected Adam update; returns ``(params, moments)``."""
    if t < 1:
        raise ValueError("t must be >= 1")
    g = np.asarray(grads, dtype=float)
    m = beta1 * moments.m + (1.0 - beta1) * g
    v = beta2 * moments.v + (1.0 - beta2) * g * g
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    params = np.asarray(params, dtype=float) - lr * m_hat / (np.sqrt(v_hat) + eps_hat)
    return params, AdamMoments(m, v)


def train(dataset: Dataset, config: TrainConfig, init: np.ndarray | None = None,
          callback: Callable[[int, LossGradient], None] | None = None):
    """Full-batch Adam on ``theta``.

    ``init`` is an optional starting ``theta``; otherwise :func:`initial_theta`
    is drawn from ``config.seed``. The loss recorded for an epoch is the one
    evaluated at the parameters that produced that epoch's gradient.

    Returns
    -------
    (EnergyWeights, PotentialWeights, LossReport)

    Raises
    ------
    TrainingAborted
        With the epoch index when a rollout or gradient fails.
    """
    theta = initial_theta(config.seed) if init is None else np.array(init, dtype=float)
    if theta.shape != (N_WEIGHTS,):
        raise ValueError(f"init must have shape ({N_WEIGHTS},)")
    moments = AdamMoments.zeros(N_WEIGHTS)
    report = LossReport()
    for epoch in range(1, config.epochs + 1):
        try:
            lg = loss_and_gradient(theta, dataset, config)
        except HomeostasisError as exc:
            raise TrainingAborted(epoch, exc) from exc
        report.append(lg.data, lg.penalty)
        if callback is not None:
            callback(epoch, lg)
        theta, moments = adam_step(theta, lg.grad, moments, epoch, config.learning_rate)
    ew, pw = constrain(theta, config.activation_mode)
    return ew, pw, report


def synthetic_experiment(protocol: LoadingProtocol, ew: EnergyWeights, pw: PotentialWeights,
                         eps: float = DEFAULT_EPS) -> Experiment:
    """Experiment whose measurements are the engine's own predictions."""
    return Experiment(protocol, simulate(protocol, ew, pw, eps=eps).stresses)


def dataset_of(experiments: Sequence[Experiment]) -> Dataset:
    return Dataset(tuple(experiments))
