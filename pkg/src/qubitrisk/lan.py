"""Dense-matrix check of the Gaussian approximation of rotated block states.

For ``n`` qubits with small eigenvalue ``lam``, the state restricted to the
spin-``j`` block is ``rho0 ∝ sum_m p^(j-m) |j,m><j,m|`` with
``p = lam/(1 - lam)``, rotated by the spin-``j`` image of
``U(w/sqrt(n)) = exp(i (u sigma_x + v sigma_y)/sqrt(n))``.  Identifying
``|j, m>`` with the Fock state ``|j - m>`` it is close to the displaced
thermal state ``D(beta) phi0 D(beta)^*`` with ``phi0 = (1-p) sum p^k |k><k|``
and ``beta = sqrt(1 - 2 lam) (-v + i u)``.

Basis ordering: index ``k`` of every matrix here is ``k = j - m``, so the
block state and the oscillator state share the same basis and the
identification map is the identity embedding.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.linalg import expm

from .errors import CutoffTooSmall, DimensionCap, DomainError

__all__ = [
    "MAX_BLOCK_DIM",
    "spin_matrices",
    "thermal_ratio",
    "build_block_state",
    "annihilation",
    "gaussian_displaced_thermal",
    "suggested_cutoff",
    "quadrature_means",
    "trace_distance",
    "lan_trace_distance",
    "nearest_block",
]

MAX_BLOCK_DIM = 512
TRACE_TOL = 1e-8


def _twoj(j) -> int:
    twoj = int(round(2 * j))
    if abs(2 * j - twoj) > 1e-9 or twoj < 0:
        raise DomainError(f"j={j!r} is not a non-negative half-integer")
    return twoj


def spin_matrices(j):
    """``(Jx, Jy, Jz)`` for spin ``j`` in the basis ``k = j - m``.

    Ladder elements are ``<j, m+1| J+ |j, m> = sqrt(j(j+1) - m(m+1))``.
    """
    d = _twoj(j) + 1
    m = j - np.arange(d)
    jp = np.zeros((d, d), dtype=complex)
    # J+ raises m, i.e. lowers the index k
    jp[np.arange(d - 1), np.arange(1, d)] = np.sqrt(j * (j + 1) - m[1:] * (m[1:] + 1))
    jm = jp.conj().T
    return 0.5 * (jp + jm), (jp - jm) / 2j, np.diag(m).astype(complex)


def thermal_ratio(lam: float) -> float:
    if not 0.0 < lam < 0.5:
        raise DomainError(f"lam={lam!r} outside (0, 1/2)")
    return lam / (1.0 - lam)


def build_block_state(j, n: int, lam: float, w) -> np.ndarray:
    """Rotated block state ``U_j rho0 U_j^*`` of dimension ``2j + 1``.

    ``U_j = exp(2 i (u Jx + v Jy)/sqrt(n))``: the generator is the spin-``j``
    representation of ``u sigma_x + v sigma_y`` (``sigma = 2 J`` at
    ``j = 1/2``), so a single qubit is rotated exactly by ``U(w/sqrt(n))``.
    """
    d = _twoj(j) + 1
    if d > MAX_BLOCK_DIM:
        raise DimensionCap(f"block dimension {d} exceeds {MAX_BLOCK_DIM}")
    p = thermal_ratio(lam)
    k = np.arange(d)
    diag = (1.0 - p) / (1.0 - p**d) * p**k
    u, v = w
    if u == 0 and v == 0:
        return np.diag(diag).astype(complex)
    jx, jy, _ = spin_matrices(j)
    U = expm(2j * (u * jx + v * jy) / math.sqrt(n))
    return (U * diag) @ U.conj().T


def annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim)), 1).astype(complex)


def _displaced_thermal_full(lam, w, dim):
    p = thermal_ratio(lam)
    u, v = w
    beta = math.sqrt(1.0 - 2.0 * lam) * complex(-v, u)
    thermal = (1.0 - p) * p ** np.arange(dim)
    if beta == 0:
        return np.diag(thermal).astype(complex)
    a = annihilation(dim)
    D = expm(beta * a.conj().T - np.conj(beta) * a)
    return (D * thermal) @ D.conj().T


def _padding(lam, w, cutoff):
    u, v = w
    amp2 = (1.0 - 2.0 * lam) * (u * u + v * v)
    return cutoff + 40 + int(4 * amp2 + 10 * math.sqrt(amp2 + 1))


def suggested_cutoff(lam: float, w, tol: float = TRACE_TOL) -> int:
    """Smallest cutoff whose truncated trace is at least ``1 - tol/10``."""
    dim = 64
    while True:
        rho = _displaced_thermal_full(lam, w, _padding(lam, w, dim))
        cum = np.cumsum(np.real(np.diag(rho)))[:dim]
        hit = np.nonzero(cum >= 1.0 - 0.1 * tol)[0]
        if hit.size and hit[0] < dim - 1:
            return int(hit[0]) + 1
        dim *= 2


def gaussian_displaced_thermal(lam: float, w, cutoff: int) -> np.ndarray:
    """Fock-basis matrix of the displaced thermal state, truncated to
    ``cutoff`` levels.

    The displacement ``exp(beta a^* - conj(beta) a)`` is exponentiated in a
    padded space and then truncated, so the kept entries are free of
    edge effects.

    Raises
    ------
    CutoffTooSmall
        If more than ``1e-8`` of the trace falls outside the cutoff.
    """
    if cutoff < 1:
        raise DomainError("cutoff must be positive")
    full = _displaced_thermal_full(lam, w, _padding(lam, w, cutoff))
    rho = full[:cutoff, :cutoff]
    tr = float(np.real(np.trace(rho)))
    if tr < 1.0 - TRACE_TOL:
        raise CutoffTooSmall(
            f"cutoff {cutoff} keeps trace {tr:.12g}",
            trace=tr,
            suggested=suggested_cutoff(lam, w),
        )
    return rho


def quadrature_means(rho) -> tuple[float, float]:
    """Expectations of ``X = (a + a^*)/2`` and ``Y = (a - a^*)/(2i)``."""
    rho = np.asarray(rho)
    a_mean = complex(np.trace(rho @ annihilation(rho.shape[0])))
    return a_mean.real, a_mean.imag


def trace_distance(a, b) -> float:
    """``||a - b||_1 / 2`` for Hermitian matrices of equal size."""
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(a - b))))


def lan_trace_distance(j, n: int, lam: float, w, cutoff: int) -> float:
    """Trace distance between a rotated block state and its Gaussian limit.

    Both states are embedded in a common space of dimension
    ``max(2j + 1, cutoff)``.
    """
    block = build_block_state(j, n, lam, w)
    gauss = gaussian_displaced_thermal(lam, w, cutoff)
    dim = max(block.shape[0], cutoff)
    A = np.zeros((dim, dim), dtype=complex)
    B = np.zeros((dim, dim), dtype=complex)
    A[: block.shape[0], : block.shape[0]] = block
    B[:cutoff, :cutoff] = gauss
    return trace_distance(A, B)


def nearest_block(n: int, lam: float, offset: float = 0.0) -> float:
    """Admissible ``j`` closest to ``n (1/2 - lam) + offset``."""
    target = n * (0.5 - lam) + offset
    twoj = int(round(2 * target))
    if (twoj - n) % 2:
        twoj += 1 if 2 * target > twoj else -1
    twoj = min(max(twoj, n % 2), n)
    return 0.5 * twoj
