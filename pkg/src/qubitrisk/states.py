"""Qubit states as Bloch vectors, frame rotations and Pauli sampling.

A qubit density matrix is stored as its Bloch vector ``r`` with
``rho = (I + r . sigma) / 2``.  Two-by-two matrices are only built on demand
(``BlochState.density_matrix``); all estimators work with 3-vectors.

Local coordinates
-----------------
Relative to a reference frame whose +z axis points along some direction, a
state is written as ``U(w/sqrt(n)) diag(1-lam, lam) U(w/sqrt(n))^*`` with
``U(w) = exp(i (u sigma_x + v sigma_y))`` and ``w = (u, v)``.  The rotation
tilts the Bloch vector away from +z by the angle ``Phi = 2|w|/sqrt(n)`` with
azimuth ``Arg(-v + i u)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DirectionUndefined, DomainError

__all__ = [
    "PAULI",
    "BlochState",
    "Rotation",
    "LocalTheta",
    "OutcomeCounts",
    "sample_pauli_outcomes",
    "bloch_from_counts",
    "project_to_ball",
    "local_coordinates",
    "reconstruct",
    "random_direction",
]

_NORM_TOL = 1e-12
_PURE_SNAP = 1e-14

PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


@dataclass(frozen=True, eq=False)
class BlochState:
    """Qubit state ``(I + r . sigma)/2``.

    Vectors with ``|r| <= 1 + 1e-12`` are accepted and clamped onto the unit
    ball; longer vectors raise ``DomainError``.  Lengths within ``1e-14`` of
    one are treated as exactly pure.  The stored array is read-only.
    """

    r: np.ndarray

    def __post_init__(self):
        r = np.array(self.r, dtype=float).reshape(3)
        norm = math.sqrt(float(r @ r))
        if not np.isfinite(norm):
            raise DomainError("Bloch vector must be finite")
        if norm > 1.0 + _NORM_TOL:
            raise DomainError(f"Bloch vector length {norm!r} exceeds 1")
        if norm > 1.0 or (norm > 0 and 1.0 - norm <= _PURE_SNAP):
            # rounding of a unit vector must not masquerade as a mixed state:
            # sqrt(1 - |r|^2) amplifies a 1e-16 norm error to 1e-8
            r = r / norm
            norm = 1.0
        r.flags.writeable = False
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "_norm", min(norm, 1.0))

    @property
    def norm(self) -> float:
        return self._norm

    @property
    def lam(self) -> float:
        """Smallest eigenvalue ``(1 - |r|)/2``."""
        return 0.5 * (1.0 - self._norm)

    @property
    def eigenvalues(self) -> tuple[float, float]:
        """Eigenvalues in increasing order."""
        return 0.5 * (1.0 - self._norm), 0.5 * (1.0 + self._norm)

    @property
    def is_pure(self) -> bool:
        return self._norm >= 1.0

    @property
    def direction(self) -> np.ndarray:
        if self._norm == 0.0:
            raise DirectionUndefined("maximally mixed state has no direction")
        return self.r / self._norm

    def density_matrix(self) -> np.ndarray:
        return 0.5 * (np.eye(2) + np.tensordot(self.r, PAULI, axes=1))

    @classmethod
    def from_density_matrix(cls, rho) -> "BlochState":
        rho = np.asarray(rho, dtype=complex)
        return cls(np.real(np.einsum("ij,kji->k", rho, PAULI)))

    def __repr__(self):
        return "BlochState(r=[{:.6g}, {:.6g}, {:.6g}])".format(*self.r)


def _quaternion_matrix(q):
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def _quaternion_su2(q):
    # U = w I - i (x sx + y sy + z sz)
    w, x, y, z = q
    return np.array(
        [[w - 1j * z, -1j * x - y], [-1j * x + y, w + 1j * z]], dtype=complex
    )


@dataclass(frozen=True, eq=False)
class Rotation:
    """Proper rotation of the Bloch sphere together with an SU(2) lift.

    ``matrix @ r`` is the Bloch vector of ``su2 @ rho @ su2^*``, i.e.
    ``matrix[i, j] = Tr(sigma_i U sigma_j U^*) / 2``.  The lift is defined
    up to a global sign.
    """

    matrix: np.ndarray
    su2: np.ndarray = field(repr=False)

    @classmethod
    def from_quaternion(cls, q) -> "Rotation":
        q = np.asarray(q, dtype=float)
        q = q / np.linalg.norm(q)
        return cls(_quaternion_matrix(q), _quaternion_su2(q))

    @classmethod
    def identity(cls) -> "Rotation":
        return cls.from_quaternion((1.0, 0.0, 0.0, 0.0))

    @classmethod
    def about_axis(cls, axis, angle: float) -> "Rotation":
        axis = np.asarray(axis, dtype=float)
        axis = axis / np.linalg.norm(axis)
        s = math.sin(angle / 2)
        return cls.from_quaternion((math.cos(angle / 2), *(s * axis)))

    @classmethod
    def aligning(cls, direction) -> "Rotation":
        """Shortest-arc rotation taking +z onto ``direction``."""
        d = np.asarray(direction, dtype=float)
        nrm = np.linalg.norm(d)
        if nrm == 0:
            raise DirectionUndefined("cannot align with a zero vector")
        d = d / nrm
        # 1 + d_z without cancellation near the south pole
        c = 1.0 + d[2] if d[2] >= 0 else (d[0] ** 2 + d[1] ** 2) / (1.0 - d[2])
        if c == 0.0 and d[0] == 0.0 and d[1] == 0.0:
            return cls.from_quaternion((0.0, 1.0, 0.0, 0.0))
        # q ~ (1 + z.d, z x d)
        return cls.from_quaternion((c, -d[1], d[0], 0.0))

    @classmethod
    def from_su2(cls, U) -> "Rotation":
        U = np.asarray(U, dtype=complex)
        U = U / np.sqrt(np.linalg.det(U))
        w = 0.5 * np.real(U[0, 0] + U[1, 1])
        x = -0.5 * np.imag(U[0, 1] + U[1, 0])
        y = 0.5 * np.real(U[1, 0] - U[0, 1])
        z = 0.5 * np.imag(U[1, 1] - U[0, 0])
        return cls.from_quaternion((w, x, y, z))

    @classmethod
    def random(cls, rng) -> "Rotation":
        """Haar-random rotation."""
        return cls.from_quaternion(rng.standard_normal(4))

    def apply(self, r) -> np.ndarray:
        return self.matrix @ np.asarray(r, dtype=float)

    def apply_inverse(self, r) -> np.ndarray:
        return self.matrix.T @ np.asarray(r, dtype=float)

    def inverse(self) -> "Rotation":
        return Rotation(self.matrix.T.copy(), self.su2.conj().T.copy())

    def __matmul__(self, other: "Rotation") -> "Rotation":
        return Rotation(self.matrix @ other.matrix, self.su2 @ other.su2)


@dataclass(frozen=True, eq=False)
class LocalTheta:
    """Local parameters ``(lam, u, v)`` of a state around the +z axis of
    ``frame`` at sample size ``n``."""

    lam: float
    u: float
    v: float
    n: int
    frame: Rotation = field(default_factory=Rotation.identity)

    def __post_init__(self):
        if not 0.0 <= self.lam <= 0.5:
            raise DomainError(f"lam={self.lam!r} outside [0, 1/2]")
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n={self.n!r} must be a positive integer")

    @property
    def w(self) -> tuple[float, float]:
        return (self.u, self.v)

    @property
    def tilt(self) -> float:
        """Angle between the state and the frame's +z axis."""
        return 2.0 * math.hypot(self.u, self.v) / math.sqrt(self.n)


@dataclass(frozen=True)
class OutcomeCounts:
    """Number of +1 outcomes for sigma_x, sigma_y and sigma_z."""

    n_per_axis: int
    plus_counts: tuple

    def __post_init__(self):
        counts = tuple(int(c) for c in self.plus_counts)
        if len(counts) != 3:
            raise DomainError("plus_counts must have three entries")
        if self.n_per_axis < 1:
            raise DomainError("n_per_axis must be positive")
        if any(c < 0 or c > self.n_per_axis for c in counts):
            raise DomainError(f"counts {counts} outside [0, {self.n_per_axis}]")
        object.__setattr__(self, "plus_counts", counts)


def sample_pauli_outcomes(state: BlochState, n_per_axis: int, rng) -> OutcomeCounts:
    """Measure each Pauli observable on ``n_per_axis`` fresh copies."""
    p = np.clip(0.5 * (1.0 + state.r), 0.0, 1.0)
    return OutcomeCounts(int(n_per_axis), tuple(rng.binomial(n_per_axis, p)))


def bloch_from_counts(counts: OutcomeCounts) -> np.ndarray:
    """Linear-inversion Bloch vector; may lie outside the unit ball."""
    return 2.0 * np.asarray(counts.plus_counts, dtype=float) / counts.n_per_axis - 1.0


def project_to_ball(raw) -> BlochState:
    """Closest state in trace norm, i.e. radial truncation onto the ball.

    For qubits the trace distance is half the Euclidean distance between
    Bloch vectors, so the minimiser is the Euclidean projection.
    """
    raw = np.asarray(raw, dtype=float)
    norm = math.sqrt(float(raw @ raw))
    if norm > 1.0:
        raw = raw / norm
    return BlochState(raw)


def local_coordinates(
    state: BlochState, frame: Rotation, n: int, strict: bool = True
) -> LocalTheta:
    """Express ``state`` as ``(lam, u, v)`` around the +z axis of ``frame``.

    Parameters
    ----------
    state : BlochState
    frame : Rotation
        ``frame.matrix`` maps frame coordinates to lab coordinates.
    n : int
        Sample size; rotations are measured in units of ``1/sqrt(n)``.
    strict : bool, optional
        If True (default) tilts of ``pi/2`` or more raise ``DomainError``.
        The local description is still exact for larger tilts, so callers
        that only need a faithful reparametrisation may pass False.

    Raises
    ------
    DirectionUndefined
        If ``state`` is maximally mixed.
    """
    if state.norm == 0.0:
        raise DirectionUndefined("maximally mixed state has no local direction")
    x, y, z = frame.apply_inverse(state.r)
    tilt = math.atan2(math.hypot(x, y), z)
    if strict and tilt >= 0.5 * math.pi:
        raise DomainError(f"tilt {tilt:.6g} rad is not below pi/2")
    azimuth = math.atan2(y, x)
    wabs = 0.5 * math.sqrt(n) * tilt
    # azimuth = Arg(-v + i u)
    u = wabs * math.sin(azimuth)
    v = -wabs * math.cos(azimuth)
    return LocalTheta(state.lam, u, v, n, frame)


def reconstruct(theta: LocalTheta) -> BlochState:
    """Lab-frame Bloch vector of ``U(w/sqrt(n)) diag(1-lam, lam) U^*``."""
    length = 1.0 - 2.0 * theta.lam
    tilt = theta.tilt
    azimuth = math.atan2(theta.u, -theta.v)
    s = math.sin(tilt)
    local = length * np.array(
        [s * math.cos(azimuth), s * math.sin(azimuth), math.cos(tilt)]
    )
    return BlochState(theta.frame.apply(local))


def random_direction(rng) -> np.ndarray:
    """Uniformly distributed unit 3-vector."""
    while True:
        g = rng.standard_normal(3)
        nrm = np.linalg.norm(g)
        if nrm > 1e-12:
            return g / nrm
