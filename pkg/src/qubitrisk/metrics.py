"""Loss functions between qubit states and their local expansions.

All logarithms are natural.  Binary-distribution functions accept either
``BinaryDist`` instances or plain floats/arrays holding ``lam`` (the
probability of the first outcome), and broadcast over arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import kl_div, xlogy

from .errors import DomainError, Singular
from .states import BlochState

__all__ = [
    "BinaryDist",
    "LossDecomposition",
    "fidelity",
    "bures_sq",
    "bures_sq_expansion",
    "hellinger_sq",
    "kl",
    "qre",
    "qre_expansion",
    "fisher_pauli",
    "bures_weight_bloch",
    "bures_weight_local",
]


@dataclass(frozen=True)
class BinaryDist:
    """Two-outcome distribution ``(lam, 1 - lam)``."""

    lam: float

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise DomainError(f"lam={self.lam!r} outside [0, 1]")

    @property
    def probs(self) -> np.ndarray:
        return np.array([self.lam, 1.0 - self.lam])


@dataclass(frozen=True)
class LossDecomposition:
    """Split of a loss into eigenvalue and rotation parts.

    ``remainder_bound`` is the observed magnitude of what the two leading
    terms leave out, i.e. ``|exact - eigen_term - rotation_term|``.
    """

    eigen_term: float
    rotation_term: float
    remainder_bound: float

    @property
    def total(self) -> float:
        return self.eigen_term + self.rotation_term


def _lam(p):
    return p.lam if isinstance(p, BinaryDist) else np.asarray(p, dtype=float)


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def fidelity(a: BlochState, b: BlochState) -> float:
    """Qubit fidelity ``(Tr|sqrt(rho) sqrt(sigma)|)^2`` from Bloch vectors."""
    na, nb = a.norm, b.norm
    f = 0.5 * (
        1.0
        + math.sqrt((1.0 - na) * (1.0 + na)) * math.sqrt((1.0 - nb) * (1.0 + nb))
        + float(a.r @ b.r)
    )
    return min(max(f, 0.0), 1.0)


def bures_sq(a: BlochState, b: BlochState) -> float:
    """Squared Bures distance ``2 (1 - sqrt(F))``."""
    f = fidelity(a, b)
    return 2.0 * (1.0 - f) / (1.0 + math.sqrt(f))


def hellinger_sq(p, q):
    """Squared Hellinger distance between binary distributions."""
    lp, lq = _lam(p), _lam(q)
    d = lp - lq
    with np.errstate(invalid="ignore", divide="ignore"):
        s0 = np.sqrt(lp) + np.sqrt(lq)
        s1 = np.sqrt(1.0 - lp) + np.sqrt(1.0 - lq)
        h = np.where(s0 > 0, (d / s0) ** 2, 0.0) + np.where(s1 > 0, (d / s1) ** 2, 0.0)
    return _scalar(h)


def kl(p, q):
    """Kullback-Leibler divergence ``KL(p || q)``; ``inf`` on support mismatch."""
    lp, lq = _lam(p), _lam(q)
    # kl_div(x, y) = x log(x/y) - x + y is elementwise non-negative and the
    # linear parts cancel between the two outcomes.
    return _scalar(kl_div(lp, lq) + kl_div(1.0 - lp, 1.0 - lq))


def qre(a: BlochState, b: BlochState) -> float:
    """Quantum relative entropy ``Tr rho_a (log rho_a - log rho_b)``.

    Written in the eigenbasis of ``b``: with eigenvalues ``s_pm = (1 pm |b|)/2``
    and diagonal weights ``c_pm = (1 pm a . b_hat)/2`` of ``rho_a`` there,
    ``S = sum q log q - sum c log s`` where ``q_pm = (1 pm |a|)/2``.
    Returns ``inf`` if ``b`` is pure and ``a`` is not that same state.
    """
    na, nb = a.norm, b.norm
    cos_term = float(a.r @ b.r) / nb if nb > 0 else 0.0
    qp, qm = 0.5 * (1.0 + na), 0.5 * (1.0 - na)
    cp, cm = 0.5 * (1.0 + cos_term), 0.5 * (1.0 - cos_term)
    sp, sm = 0.5 * (1.0 + nb), 0.5 * (1.0 - nb)
    cm = max(cm, 0.0)
    s = xlogy(qp, qp) + xlogy(qm, qm) - xlogy(cp, sp) - xlogy(cm, sm)
    return max(float(s), 0.0)


def _check_half(name, x, closed_low=True):
    ok = (0.0 <= x <= 0.5) if closed_low else (0.0 < x <= 0.5)
    if not ok:
        raise DomainError(f"{name}={x!r} outside the allowed eigenvalue range")


def _axis_pair(lam, lam_hat, phi):
    a = BlochState([0.0, 0.0, 1.0 - 2.0 * lam])
    b = BlochState((1.0 - 2.0 * lam_hat) * np.array([math.sin(phi), 0.0, math.cos(phi)]))
    return a, b


def bures_sq_expansion(lam: float, lam_hat: float, phi: float) -> LossDecomposition:
    """Eigenvalue/rotation split of ``bures_sq`` to second order in ``phi``.

    ``lam`` and ``lam_hat`` are the small eigenvalues of the two states and
    ``phi`` the angle between their Bloch vectors.
    """
    _check_half("lam", lam)
    _check_half("lam_hat", lam_hat)
    if abs(phi) > 0.5:
        raise DomainError("expansion angle must satisfy |phi| <= 0.5")
    eigen = hellinger_sq(lam, lam_hat)
    coef = (1.0 - 2 * lam) * (1.0 - 2 * lam_hat) / (
        math.sqrt((1.0 - lam) * (1.0 - lam_hat)) + math.sqrt(lam * lam_hat)
    )
    rot = 0.25 * coef * phi * phi
    exact = bures_sq(*_axis_pair(lam, lam_hat, phi))
    return LossDecomposition(eigen, rot, abs(exact - eigen - rot))


def qre_expansion(lam: float, lam_hat: float, phi: float) -> LossDecomposition:
    """Eigenvalue/rotation split of ``qre`` to second order in ``phi``."""
    _check_half("lam", lam)
    if lam_hat == 0.0:
        raise DomainError("lam_hat = 0: relative entropy diverges under rotation")
    _check_half("lam_hat", lam_hat, closed_low=False)
    if abs(phi) > 0.5:
        raise DomainError("expansion angle must satisfy |phi| <= 0.5")
    eigen = kl(lam, lam_hat)
    rot = 0.25 * (1.0 - 2 * lam) * phi * phi * math.log((1.0 - lam_hat) / lam_hat)
    exact = qre(*_axis_pair(lam, lam_hat, phi))
    return LossDecomposition(eigen, rot, abs(exact - eigen - rot))


def fisher_pauli(state: BlochState) -> np.ndarray:
    """Fisher information of one round of x, y and z Pauli measurements."""
    r = state.r
    if np.any(np.abs(r) >= 1.0):
        raise Singular("Fisher information is infinite along a pure axis")
    return np.diag(1.0 / ((1.0 + r) * (1.0 - r)))


def bures_weight_bloch(state: BlochState) -> np.ndarray:
    """Quadratic form ``G`` with ``bures_sq(r, r + d) = d^T G d + O(|d|^3)``.

    ``G = (I + r r^T / (1 - |r|^2)) / 4``; its diagonal is
    ``(1 + r_i^2/(1 - |r|^2))/4`` and it is diagonal whenever ``r`` lies
    on a coordinate axis.
    """
    if state.norm >= 1.0:
        raise Singular("Bures metric diverges radially at pure states")
    r = state.r
    return 0.25 * (np.eye(3) + np.outer(r, r) / ((1.0 - state.norm) * (1.0 + state.norm)))


def bures_weight_local(lam0: float) -> np.ndarray:
    """Weight matrix of ``n * bures_sq`` in the local coordinates
    ``(sqrt(n) lam, u, v)`` around a state with small eigenvalue ``lam0``."""
    if lam0 in (0.0, 0.5):
        raise Singular(f"local weight matrix is singular at lam0={lam0}")
    if not 0.0 < lam0 < 0.5:
        raise DomainError(f"lam0={lam0!r} outside (0, 1/2)")
    rot = (1.0 - 2 * lam0) ** 2
    return np.diag([1.0 / (4 * lam0 * (1 - lam0)), rot, rot])
