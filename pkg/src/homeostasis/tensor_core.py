"""Spectral algebra for symmetric 3x3 tensors.

Symmetric tensors are plain ``(3, 3)`` float arrays. ``sym_tensor`` and
``components`` convert from and to the six independent components
``(a11, a22, a33, a12, a13, a23)``.

Eigenvalues are returned in descending order. Eigenvalues closer than
``GROUP_TOL * |a|`` are grouped into a shared eigenspace; the groups are used
by :func:`spectral_jvp` to take the degenerate limit of divided differences.
Inputs with exactly zero off-diagonal entries keep the coordinate axes as
eigenvectors and order ties by axis index (stable sort), so the eigenbasis of
a coaxial state is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError, InvalidInputError, TensorRangeError

GROUP_TOL = 1e-10
EXP_MAX = 300.0

_I3 = np.eye(3)
_TWO_PI_3 = 2.0 * np.pi / 3.0
_IDX = np.arange(3)


@dataclass(frozen=True)
class Spectral3:
    """Eigenvalues (descending), orthonormal eigenvectors as columns, and groups
    of indices that share an eigenspace."""

    values: np.ndarray
    vectors: np.ndarray
    groups: tuple[tuple[int, ...], ...]

    @property
    def projections(self) -> np.ndarray:
        """Eigenprojections ``m_i (x) m_i`` stacked along the first axis."""
        v = self.vectors
        return np.einsum("ai,bi->iab", v, v)

    @cached_property
    def group_ids(self) -> np.ndarray:
        """Index of the group each eigenvalue belongs to."""
        ids = np.empty(3, dtype=int)
        for k, g in enumerate(self.groups):
            ids[list(g)] = k
        return ids

    def group_of(self, i: int) -> tuple[int, ...]:
        for g in self.groups:
            if i in g:
                return g
        raise IndexError(i)

    def compose(self, values) -> np.ndarray:
        """Return ``sum_i values[i] m_i (x) m_i``."""
        v = self.vectors
        r = (v * np.asarray(values, dtype=float)) @ v.T
        return 0.5 * (r + r.T)


def sym_tensor(a11, a22, a33, a12=0.0, a13=0.0, a23=0.0) -> np.ndarray:
    return np.array(
        [[a11, a12, a13], [a12, a22, a23], [a13, a23, a33]], dtype=float
    )


def components(a: np.ndarray) -> np.ndarray:
    """Six independent components ``(a11, a22, a33, a12, a13, a23)``."""
    return np.array([a[0, 0], a[1, 1], a[2, 2], a[0, 1], a[0, 2], a[1, 2]])


def _check(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.shape != (3, 3):
        raise InvalidInputError(f"expected a 3x3 tensor, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("tensor has non-finite entries")
    return 0.5 * (a + a.T)


def _group(values: np.ndarray, scale: float) -> tuple[tuple[int, ...], ...]:
    tol = GROUP_TOL * scale
    groups = [[0]]
    for i in (1, 2):
        if values[i - 1] - values[i] <= tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    return tuple(tuple(g) for g in groups)


def _cardano(a: np.ndarray, scale: float):
    q = np.trace(a) / 3.0
    b = a - q * _I3
    p = np.sqrt(np.sum(b * b) / 6.0)
    if p <= 1e-8 * scale:
        return None
    r = np.clip(det(b / p) / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    l1 = q + 2.0 * p * np.cos(phi)
    l3 = q + 2.0 * p * np.cos(phi + _TWO_PI_3)
    l2 = 3.0 * q - l1 - l3
    lam = np.array([l1, l2, l3])
    vecs = np.empty((3, 3))
    for i, li in enumerate(lam):
        m = a - li * _I3
        cands = (np.cross(m[0], m[1]), np.cross(m[0], m[2]), np.cross(m[1], m[2]))
        norms = [np.dot(c, c) for c in cands]
        k = int(np.argmax(norms))
        if norms[k] <= (1e-6 * scale) ** 4:
            return None
        vecs[:, i] = cands[k] / np.sqrt(norms[k])
    # a-posteriori acceptance: otherwise the Jacobi sweep takes over
    if np.max(np.abs(vecs.T @ vecs - _I3)) > 1e-13:
        return None
    if np.max(np.abs(a @ vecs - vecs * lam)) > 1e-13 * scale:
        return None
    return lam, vecs


def _jacobi(a: np.ndarray, scale: float):
    a = a.copy()
    v = np.eye(3)
    for _ in range(60):
        off = a[0, 1] ** 2 + a[0, 2] ** 2 + a[1, 2] ** 2
        if off <= (1e-17 * scale) ** 2:
            break
        for p, q in ((0, 1), (0, 2), (1, 2)):
            apq = a[p, q]
            if abs(apq) <= 1e-20 * scale:
                a[p, q] = a[q, p] = 0.0
                continue
            theta = (a[q, q] - a[p, p]) / (2.0 * apq)
            t = np.copysign(1.0, theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            rot = np.eye(3)
            rot[p, p] = rot[q, q] = c
            rot[p, q] = s
            rot[q, p] = -s
            a = rot.T @ a @ rot
            v = v @ rot
    return np.diag(a).copy(), v


def eig_sym(a) -> Spectral3:
    """Eigendecomposition of a symmetric 3x3 tensor.

    Closed-form (trigonometric Cardano) eigenvalues with cross-product
    eigenvectors; falls back to cyclic Jacobi rotations whenever the closed
    form fails its orthogonality/residual check (clustered eigenvalues).

    Raises
    ------
    InvalidInputError
        If ``a`` has non-finite entries.
    """
    a = _check(a)
    scale = float(np.sqrt(np.sum(a * a)))
    if a[0, 1] == 0.0 and a[0, 2] == 0.0 and a[1, 2] == 0.0:
        d = np.diag(a).copy()
        order = np.argsort(-d, kind="stable")
        return Spectral3(d[order], _I3[:, order].copy(), _group(d[order], scale))
    res = _cardano(a, scale)
    if res is None:
        lam, vecs = _jacobi(a, scale)
    else:
        lam, vecs = res
    order = np.argsort(-lam, kind="stable")
    lam, vecs = lam[order], vecs[:, order]
    return Spectral3(lam, vecs, _group(lam, scale))


def spectral_jvp(spec: Spectral3, values, jac, da, dvalues=None) -> np.ndarray:
    """Directional derivatives of the spectral map ``F(A) = sum_i g_i(lam) P_i``.

    Parameters
    ----------
    spec
        Eigendecomposition of ``A``.
    values
        ``g_i`` evaluated at the eigenvalues of ``A``, shape ``(3,)``.
    jac
        ``d g_i / d lam_j``, shape ``(3, 3)``.
    da
        Tangent directions of ``A``, shape ``(k, 3, 3)`` (symmetric).
    dvalues
        Extra tangents of ``g`` at fixed ``A`` (e.g. from weights), ``(k, 3)``.

    Returns
    -------
    ndarray, shape ``(k, 3, 3)``
    """
    v = spec.vectors
    lam = spec.values
    g = np.asarray(values, dtype=float)
    jac = np.asarray(jac, dtype=float)
    at = v.T @ da @ v
    gid = spec.group_ids
    same = gid[:, None] == gid[None, :]
    jd = np.diag(jac)
    gap = np.where(same, 1.0, lam[:, None] - lam[None, :])
    kmat = np.where(
        same,
        0.5 * (jd[:, None] - jac + jd[None, :] - jac.T),
        (g[:, None] - g[None, :]) / gap,
    )
    d = at * kmat
    diag = at[:, _IDX, _IDX] @ jac.T
    if dvalues is not None:
        diag = diag + dvalues
    d[:, _IDX, _IDX] = diag
    return v @ d @ v.T


def tr(a) -> float:
    return float(a[0, 0] + a[1, 1] + a[2, 2])


def det(a) -> float:
    return float(
        a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
        - a[0, 1] * (a[1, 0] * a[2, 2] - a[1, 2] * a[2, 0])
        + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0])
    )


def dev(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return a - (tr(a) / 3.0) * _I3


def congruence(x, a) -> np.ndarray:
    """``x . a . x`` for symmetric ``x`` and ``a``; symmetric by construction."""
    r = x @ a @ x
    return 0.5 * (r + r.T)


def exp_sym(a) -> np.ndarray:
    """Matrix exponential of a symmetric tensor, ``sum_i exp(lam_i) P_i``.

    Raises
    ------
    TensorRangeError
        If an eigenvalue exceeds ``EXP_MAX`` (overflow).
    """
    spec = eig_sym(a)
    return exp_spectral(spec)


def exp_spectral(spec: Spectral3) -> np.ndarray:
    if spec.values[0] > EXP_MAX:
        raise TensorRangeError(f"exp overflow: eigenvalue {spec.values[0]:.6g} > {EXP_MAX}")
    return spec.compose(np.exp(spec.values))


def exp_jvp(spec: Spectral3, da) -> np.ndarray:
    e = np.exp(spec.values)
    return spectral_jvp(spec, e, np.diag(e), da)


def _require_spd(spec: Spectral3, what: str) -> None:
    if not spec.values[-1] > 0.0:
        raise DomainError(f"{what}: tensor is not SPD (smallest eigenvalue {spec.values[-1]:.6g})")


def sqrt_spd(a) -> np.ndarray:
    """Unique SPD square root.

    Raises
    ------
    DomainError
        If any eigenvalue is <= 0.
    """
    spec = eig_sym(a)
    return spec.compose(sqrt_values(spec))


def sqrt_values(spec: Spectral3) -> np.ndarray:
    """Positive square roots of the eigenvalues of an SPD decomposition.

    Raises
    ------
    DomainError
        If any eigenvalue is <= 0.
    """
    _require_spd(spec, "sqrt")
    return np.sqrt(spec.values)


def sqrt_jvp(spec: Spectral3, da) -> np.ndarray:
    r = np.sqrt(spec.values)
    return spectral_jvp(spec, r, np.diag(0.5 / r), da)


def inv_spd(a) -> np.ndarray:
    """Inverse of an SPD tensor.

    Raises
    ------
    DomainError
        If ``a`` is singular or not positive definite.
    """
    a = _check(a)
    try:
        np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        raise DomainError("inv_spd: tensor is not SPD") from None
    d = det(a)
    if d <= 0.0:
        raise DomainError("inv_spd: singular tensor")
    adj = np.array(
        [
            [a[1, 1] * a[2, 2] - a[1, 2] ** 2, a[0, 2] * a[1, 2] - a[0, 1] * a[2, 2], a[0, 1] * a[1, 2] - a[0, 2] * a[1, 1]],
            [0.0, a[0, 0] * a[2, 2] - a[0, 2] ** 2, a[0, 1] * a[0, 2] - a[0, 0] * a[1, 2]],
            [0.0, 0.0, a[0, 0] * a[1, 1] - a[0, 1] ** 2],
        ]
    )
    adj[1, 0], adj[2, 0], adj[2, 1] = adj[0, 1], adj[0, 2], adj[1, 2]
    return adj / d


def invariants(a) -> tuple[float, float, float]:
    """Principal invariants ``(I1, I2, I3)``."""
    a = np.asarray(a, dtype=float)
    i1 = tr(a)
    i2 = 0.5 * (i1 * i1 - float(np.sum(a * a.T)))
    return i1, i2, det(a)
