"""Recurrent material-point update.

Each step freezes the flow direction at the start of the interval and solves
the scaled homeostatic residual for the growth multiplier::

    cg(g)  = ug_n exp(2 dt g flow_n) ug_n,   ug(g) = sqrt(cg(g))
    ce(g)  = ug^-1 c_next ug^-1
    r(g)   = phi_hat(sigma_bar(ce(g))) - 1 - g * weta

with a local Newton iteration started at ``g = 0`` (at most 30 updates).
If an update overflows the exponential or fails to converge, the root is
found by bisection on a bracket grown geometrically from zero.

Directions flagged ``ZERO_STRESS`` are handled as a Lagrange multiplier under
coaxial loading: the corresponding diagonal component of the reported stress
is removed, while ``sigma_bar`` (and hence growth) is left untouched.

Passing ``sensitivities=True`` to :func:`simulate` propagates forward-mode
tangents of the whole rollout with respect to the 13 weights; the Newton
solution is differentiated through the implicit-function relation
``dg = -(dr/dw) / (dr/dg)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import energy_net as en
from . import potential_net as pn
from . import tensor_core as tc
from .errors import (
    ConvergenceError,
    DomainError,
    SimulationError,
    SingularJacobianError,
    StepFailure,
    TensorRangeError,
)

DEFAULT_EPS = 1e-8
MAX_NEWTON = 30
N_WEIGHTS = 13
WEIGHT_NAMES = en.ENERGY_WEIGHT_NAMES + pn.POTENTIAL_WEIGHT_NAMES

_I3 = np.eye(3)


class Constraint(str, enum.Enum):
    MEASURED = "M"
    ZERO_STRESS = "Z"


@dataclass(frozen=True)
class GrowthState:
    """Growth right Cauchy-Green tensor and its cached SPD square root."""

    cg: np.ndarray
    ug: np.ndarray

    @classmethod
    def virgin(cls) -> GrowthState:
        return cls(_I3.copy(), _I3.copy())

    @classmethod
    def from_cg(cls, cg) -> GrowthState:
        cg = np.asarray(cg, dtype=float)
        return cls(cg, tc.sqrt_spd(cg))


@dataclass(frozen=True)
class LoadingProtocol:
    """Prescribed diagonal right Cauchy-Green history on a time grid (hours)."""

    times: np.ndarray
    stretches: np.ndarray            # (n, 3): C11, C22, C33
    mask: tuple[Constraint, Constraint, Constraint]

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        stretches = np.asarray(self.stretches, dtype=float)
        if times.ndim != 1 or times.size < 1:
            raise ValueError("times must be a non-empty 1-D array")
        if stretches.shape != (times.size, 3):
            raise ValueError(f"stretches must have shape ({times.size}, 3), got {stretches.shape}")
        if np.any(np.diff(times) <= 0.0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(stretches)) or np.any(stretches <= 0.0):
            raise ValueError("prescribed C components must be finite and > 0")
        mask = tuple(Constraint(m) for m in self.mask)
        if len(mask) != 3:
            raise ValueError("mask needs one flag per direction")
        if Constraint.MEASURED not in mask:
            raise ValueError("at least one direction must be MEASURED")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "stretches", stretches)
        object.__setattr__(self, "mask", mask)

    def __len__(self) -> int:
        return self.times.size

    def c(self, n: int) -> np.ndarray:
        return np.diag(self.stretches[n])

    @property
    def measured(self) -> np.ndarray:
        return np.array([m is Constraint.MEASURED for m in self.mask])


@dataclass(frozen=True)
class StepResult:
    s_reported: np.ndarray
    sigma_bar: np.ndarray
    gamma_hat: float
    phi_hat_value: float
    residual: float
    newton_iters: int
    s_full: np.ndarray | None = None


@dataclass
class Trajectory:
    """Per-sample results of a rollout; entry 0 is the initial (virgin) state."""

    times: np.ndarray
    results: list[StepResult]
    states: list[GrowthState]
    stress_sensitivities: np.ndarray | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.results)

    @property
    def stresses(self) -> np.ndarray:
        """Diagonal of the reported stress, shape ``(n, 3)``."""
        return np.array([np.diag(r.s_reported) for r in self.results])

    @property
    def gamma_hat(self) -> np.ndarray:
        return np.array([r.gamma_hat for r in self.results])

    @property
    def phi_hat(self) -> np.ndarray:
        return np.array([r.phi_hat_value for r in self.results])

    @property
    def residuals(self) -> np.ndarray:
        return np.array([r.residual for r in self.results])

    @property
    def newton_iters(self) -> np.ndarray:
        return np.array([r.newton_iters for r in self.results])

    @property
    def det_cg(self) -> np.ndarray:
        return np.array([tc.det(s.cg) for s in self.states])


class NewtonResult(NamedTuple):
    gamma_hat: float
    residual: float
    iterations: int
    bisection: bool


class _Eval(NamedTuple):
    r: float
    cg: np.ndarray
    ug: np.ndarray
    ui: np.ndarray
    spec_cg: tc.Spectral3
    spec_x: tc.Spectral3
    ex: np.ndarray
    ce: np.ndarray
    spec_ce: tc.Spectral3
    sigma_bar: np.ndarray
    h: np.ndarray
    pstate: pn.PrincipalStressState
    phi: float
    flow: np.ndarray


class _Kernel:
    """Residual of one step as a function of the growth multiplier."""

    def __init__(self, c_next, ug_n, flow_n, dt, ew, pw):
        if not dt > 0.0:
            raise ValueError("dt must be > 0")
        self.c = np.asarray(c_next, dtype=float)
        self.ug_n = ug_n
        self.flow_n = flow_n
        self.dt = float(dt)
        self.ew = ew
        self.pw = pw

    def evaluate(self, g: float) -> _Eval:
        spec_x = tc.eig_sym((2.0 * self.dt * g) * self.flow_n)
        ex = tc.exp_spectral(spec_x)
        cg = tc.congruence(self.ug_n, ex)
        spec_cg = tc.eig_sym(cg)
        root = tc.sqrt_values(spec_cg)
        ug = spec_cg.compose(root)
        ui = spec_cg.compose(1.0 / root)
        ce = tc.congruence(ui, self.c)
        spec_ce, sigma_bar, h = en.stress_terms(ce, self.ew)
        pstate, phi, flow = pn.potential_terms(sigma_bar, self.pw)
        r = phi - 1.0 - g * self.pw.weta
        return _Eval(r, cg, ug, ui, spec_cg, spec_x, ex, ce, spec_ce, sigma_bar, h, pstate, phi, flow)

    def residual(self, g: float) -> float:
        return self.evaluate(g).r

    def tangents(self, e: _Eval, g: float, dg, dug_n, dflow_n, dew, dpw):
        """Forward-mode tangents of the step outputs for ``k`` directions."""
        dg = np.asarray(dg, dtype=float)
        dx = 2.0 * self.dt * (dg[:, None, None] * self.flow_n + g * dflow_n)
        dex = tc.exp_jvp(e.spec_x, dx)
        ugn, ex = self.ug_n, e.ex
        dcg = ugn @ dex @ ugn + dug_n @ ex @ ugn + ugn @ ex @ dug_n
        dcg = 0.5 * (dcg + np.swapaxes(dcg, 1, 2))
        dug = tc.sqrt_jvp(e.spec_cg, dcg)
        dui = -e.ui @ dug @ e.ui
        dce = dui @ self.c @ e.ui + e.ui @ self.c @ dui
        dsb, dh = en.stress_jvp(e.spec_ce, self.ew, dce, dew)
        dphi, dflow = pn.potential_jvp(e.pstate, self.pw, dsb, dpw)
        dr = dphi - dg * self.pw.weta
        if dpw is not None:
            dr = dr - g * dpw[:, 8]
        ds = 2.0 * (dui @ e.h @ e.ui + e.ui @ dh @ e.ui + e.ui @ e.h @ dui)
        return dr, dcg, dug, dsb, dflow, ds

    def derivative(self, g: float, e: _Eval | None = None) -> float:
        """``dr/dg`` by forward-mode differentiation."""
        if e is None:
            e = self.evaluate(g)
        dx = (2.0 * self.dt) * self.flow_n[None]
        dcg = tc.congruence(self.ug_n, tc.exp_jvp(e.spec_x, dx)[0])
        dug = tc.sqrt_jvp(e.spec_cg, dcg[None])[0]
        dui = -e.ui @ dug @ e.ui
        dce = dui @ self.c @ e.ui
        dce = dce + dce.T
        dsb = en.driving_force_jvp(e.spec_ce, self.ew, dce[None])[0]
        # d phi = flow : d sigma_bar, since flow shares the eigenbasis of sigma_bar
        return float(np.sum(e.flow * dsb)) - self.pw.weta

    def derivative_fd(self, g: float) -> float:
        h = 1e-7 * max(1.0, abs(g))
        return (self.residual(g + h) - self.residual(g - h)) / (2.0 * h)


def _flow_of(c, ug, ew, pw) -> np.ndarray:
    ui = tc.inv_spd(ug)
    sb = en.driving_force(tc.congruence(ui, c), ew)
    return pn.dphihat_dsigma(sb, pw)


def residual(gamma_hat, c_next, state_n: GrowthState, flow_n, dt, ew, pw) -> float:
    """Scaled homeostatic residual ``phi_hat - 1 - gamma_hat * weta``.

    Raises
    ------
    StepFailure
        If the exponential update overflows.
    """
    try:
        return _Kernel(c_next, state_n.ug, flow_n, dt, ew, pw).residual(float(gamma_hat))
    except TensorRangeError as exc:
        raise StepFailure(str(exc)) from exc


def _safe_residual(kernel: _Kernel, g: float):
    try:
        return kernel.evaluate(g)
    except (TensorRangeError, DomainError):
        return None


def _bisection(kernel: _Kernel, eps: float, max_iter: int = 400) -> NewtonResult:
    e0 = kernel.evaluate(0.0)
    if abs(e0.r) < eps:
        return NewtonResult(0.0, e0.r, 0, True)
    direction = 1.0 if e0.r > 0.0 else -1.0
    lo, r_lo = 0.0, e0.r
    step = 1.0
    hi = None
    for _ in range(200):
        cand = direction * step
        e = _safe_residual(kernel, cand)
        if e is None:
            step *= 0.5
            continue
        if np.sign(e.r) != np.sign(r_lo):
            hi = cand
            break
        lo, r_lo = cand, e.r
        step *= 2.0
    if hi is None:
        raise ConvergenceError("could not bracket the homeostatic residual", residual=r_lo)
    a, b = lo, hi
    for it in range(1, max_iter + 1):
        mid = 0.5 * (a + b)
        r_mid = kernel.residual(mid)
        if abs(r_mid) < eps or abs(b - a) <= 4.0 * np.finfo(float).eps * max(1.0, abs(mid)):
            return NewtonResult(mid, r_mid, it, True)
        if np.sign(r_mid) == np.sign(r_lo):
            a, r_lo = mid, r_mid
        else:
            b = mid
    raise ConvergenceError("bisection did not converge", residual=r_mid, iterations=max_iter)


def _newton(kernel: _Kernel, eps: float, max_iter: int, safeguard: bool = True):
    g = 0.0
    e = kernel.evaluate(g)
    for it in range(1, max_iter + 1):
        if abs(e.r) < eps:
            return NewtonResult(g, e.r, it - 1, False), e
        dr = kernel.derivative(g, e)
        if dr == 0.0 or not np.isfinite(dr):
            if safeguard and dr != 0.0:
                break
            raise SingularJacobianError(
                "dr/dgamma vanished in the Newton update", residual=e.r, iterations=it
            )
        g_new = g - e.r / dr
        e_new = _safe_residual(kernel, g_new)
        if e_new is None:
            if not safeguard:
                raise StepFailure(f"exponential update overflowed at gamma_hat={g_new:.6g}")
            break
        g, e = g_new, e_new
    else:
        if abs(e.r) < eps:
            return NewtonResult(g, e.r, max_iter, False), e
        if not safeguard:
            raise ConvergenceError(
                f"Newton did not converge in {max_iter} iterations", residual=e.r, iterations=max_iter
            )
    res = _bisection(kernel, eps)
    return res, kernel.evaluate(res.gamma_hat)


def newton_solve(c_next, state_n: GrowthState, flow_n, dt, ew, pw, eps=DEFAULT_EPS,
                 max_iter=MAX_NEWTON, safeguard=True) -> NewtonResult:
    """Solve the homeostatic residual for ``gamma_hat`` starting from 0.

    Raises
    ------
    SingularJacobianError
        If ``dr/dgamma`` vanishes (e.g. all potential weights and ``weta`` zero).
    ConvergenceError
        If neither Newton nor the bisection safeguard reaches ``eps``; with
        ``safeguard=False`` after ``max_iter`` Newton updates.
    """
    kernel = _Kernel(c_next, state_n.ug, flow_n, dt, ew, pw)
    return _newton(kernel, eps, max_iter, safeguard)[0]


def residual_derivative(gamma_hat, c_next, state_n: GrowthState, flow_n, dt, ew, pw,
                        method="forward") -> float:
    """``dr/dgamma`` by forward-mode differentiation or central differences."""
    kernel = _Kernel(c_next, state_n.ug, flow_n, dt, ew, pw)
    if method == "fd":
        return kernel.derivative_fd(float(gamma_hat))
    return kernel.derivative(float(gamma_hat))


def _report(s: np.ndarray, mask) -> np.ndarray:
    out = s.copy()
    for i, m in enumerate(mask):
        if m is Constraint.ZERO_STRESS:
            # Lagrange term -2 p M with p = S_MM / 2 under coaxiality
            out[i, i] = 0.0
    return out


def _as_mask(mask) -> tuple[Constraint, ...]:
    return tuple(Constraint(m) for m in mask)


def step(c_next, state_n: GrowthState, dt, ew, pw, mask, c_n=None, eps=DEFAULT_EPS):
    """Advance one step; returns ``(StepResult, GrowthState)``.

    ``c_n`` is the prescribed tensor at the start of the step (identity if
    omitted); it fixes the frozen flow direction.
    """
    c_n = _I3 if c_n is None else np.asarray(c_n, dtype=float)
    flow_n = _flow_of(c_n, state_n.ug, ew, pw)
    kernel = _Kernel(c_next, state_n.ug, flow_n, dt, ew, pw)
    res, e = _newton(kernel, eps, MAX_NEWTON)
    s = tc.congruence(e.ui, 2.0 * e.h)
    result = StepResult(_report(s, _as_mask(mask)), e.sigma_bar, res.gamma_hat, e.phi,
                        e.r, res.iterations, s)
    return result, GrowthState(e.cg, e.ug)


def simulate(protocol: LoadingProtocol, ew, pw, eps=DEFAULT_EPS, sensitivities=False) -> Trajectory:
    """Fold :func:`step` over the protocol from the virgin state.

    With ``sensitivities=True`` the returned trajectory carries
    ``stress_sensitivities`` of shape ``(n, 3, 13)``: derivatives of the
    reported diagonal stresses with respect to the weights in
    :data:`WEIGHT_NAMES` order.

    Raises
    ------
    SimulationError
        With the failing step index and the underlying cause.
    """
    mask = protocol.mask
    n = len(protocol)
    k = N_WEIGHTS + 1  # row 0 carries d/dgamma
    eye = np.eye(N_WEIGHTS)
    dew = np.zeros((k, 4))
    dpw = np.zeros((k, 9))
    dew[1:] = eye[:, :4]
    dpw[1:] = eye[:, 4:]

    state = GrowthState.virgin()
    c0 = protocol.c(0)
    ce0 = c0.copy()
    spec_ce, sb, h = en.stress_terms(ce0, ew)
    pstate, phi, flow = pn.potential_terms(sb, pw)
    s0 = 2.0 * h
    results = [StepResult(_report(s0, mask), sb, 0.0, phi, 0.0, 0, s0)]
    states = [state]
    sens = None
    if sensitivities:
        zero = np.zeros((N_WEIGHTS, 3, 3))
        dsb, dh = en.stress_jvp(spec_ce, ew, zero, dew[1:])
        _, dflow = pn.potential_jvp(pstate, pw, dsb, dpw[1:])
        dug = zero
        sens = np.zeros((n, 3, N_WEIGHTS))
        sens[0] = np.einsum("kii->ik", 2.0 * dh)

    for i in range(1, n):
        dt = protocol.times[i] - protocol.times[i - 1]
        try:
            kernel = _Kernel(protocol.c(i), state.ug, flow, dt, ew, pw)
            res, e = _newton(kernel, eps, MAX_NEWTON)
            if sensitivities:
                g = res.gamma_hat
                dg = np.zeros(k)
                dg[0] = 1.0
                dug_n = np.concatenate([np.zeros((1, 3, 3)), dug])
                dflow_n = np.concatenate([np.zeros((1, 3, 3)), dflow])
                dr, dcg, dug_all, dsb, dflow_all, ds_all = kernel.tangents(
                    e, g, dg, dug_n, dflow_n, dew, dpw
                )
                if dr[0] == 0.0:
                    raise SingularJacobianError("dr/dgamma vanished", residual=e.r)
                dgam = -dr[1:] / dr[0]
                dug = dug_all[1:] + dgam[:, None, None] * dug_all[0]
                dflow = dflow_all[1:] + dgam[:, None, None] * dflow_all[0]
                ds = ds_all[1:] + dgam[:, None, None] * ds_all[0]
                sens[i] = np.einsum("kii->ik", ds)
        except (ConvergenceError, StepFailure, TensorRangeError, DomainError) as exc:
            raise SimulationError(i, exc) from exc
        s = tc.congruence(e.ui, 2.0 * e.h)
        results.append(StepResult(_report(s, mask), e.sigma_bar, res.gamma_hat, e.phi,
                                  e.r, res.iterations, s))
        state = GrowthState(e.cg, e.ug)
        states.append(state)
        flow = e.flow

    if sens is not None:
        sens[:, ~protocol.measured, :] = 0.0
    return Trajectory(protocol.times.copy(), results, states, sens)


def growth_invariants(ug) -> tuple[float, float, float]:
    """Isochoric invariants of ``ug`` and its determinant:
    ``(tr U / det^(1/3), (tr^2 U - tr U^2) / (2 det^(2/3)), det U)``."""
    ug = np.asarray(ug, dtype=float)
    d = tc.det(ug)
    if not d > 0.0:
        raise DomainError("ug must be SPD")
    t = tc.tr(ug)
    t2 = float(np.sum(ug * ug.T))
    return t / d ** (1.0 / 3.0), 0.5 * (t * t - t2) / d ** (2.0 / 3.0), d


def constant_protocol(times: Sequence[float], stretches, mask) -> LoadingProtocol:
    times = np.asarray(times, dtype=float)
    return LoadingProtocol(times, np.tile(np.asarray(stretches, dtype=float), (times.size, 1)), mask)
