"""Jones and Poincare calculus for single-frequency polarization states.

Conventions
-----------
The Pauli matrices are ordered ``sigma_1 = sigma_x`` (real off-diagonal),
``sigma_2 = sigma_y`` and ``sigma_3 = sigma_z`` (diagonal +1, -1), so the
horizontal state ``(1, 0)`` maps to the Poincare vector ``(0, 0, 1)``.

A trunk propagator ``exp(i theta/2 n.sigma)`` acts on Poincare vectors as a
rotation by the *full* angle ``theta`` about ``n``; with the sign of the
exponent fixed as above the rotation is clockwise when viewed from the tip
of ``n`` (i.e. by ``-theta`` under the right-hand rule).

Global phases are not observable anywhere in this package.

Every function accepts either a single Jones vector (shape ``(2,)``) or a
stack of them (shape ``(..., 2)``) and broadcasts accordingly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

#: Speed of light in vacuum, m/s (exact).
C_LIGHT = 299_792_458.0

SIGMA_1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_3 = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = np.stack([SIGMA_1, SIGMA_2, SIGMA_3])
IDENTITY = np.eye(2, dtype=complex)

_UNITARY_TOL = 1e-8


@dataclass(frozen=True)
class JonesVector:
    """Complex polarization amplitude ``(a, b)`` at a single frequency.

    The vector need not be normalized; its squared norm is the intensity.
    """

    a: complex
    b: complex

    def __array__(self, dtype=None, copy=None):
        return np.array([self.a, self.b], dtype=dtype or complex)

    @classmethod
    def from_array(cls, psi) -> "JonesVector":
        psi = np.asarray(psi, dtype=complex)
        if psi.shape != (2,):
            raise DomainError(f"expected a 2-component Jones vector, got shape {psi.shape}")
        return cls(complex(psi[0]), complex(psi[1]))

    @property
    def norm(self) -> float:
        return float(np.sqrt(abs(self.a) ** 2 + abs(self.b) ** 2))


@dataclass(frozen=True)
class BirefringenceVector:
    """Birefringence of one fiber trunk.

    Parameters
    ----------
    direction : tuple of float
        Unit Poincare-space axis of the trunk's eigenmodes.
    magnitude : float
        Differential group delay per unit length, s/m.
    """

    direction: tuple[float, float, float]
    magnitude: float

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        if d.shape != (3,):
            raise DomainError("birefringence direction must be a 3-vector")
        if abs(np.linalg.norm(d) - 1.0) > 1e-12:
            raise DomainError("birefringence direction must have unit norm")
        if not self.magnitude >= 0:
            raise DomainError("birefringence magnitude must be >= 0")
        object.__setattr__(self, "direction", tuple(float(x) for x in d))
        object.__setattr__(self, "magnitude", float(self.magnitude))

    @classmethod
    def from_vector(cls, vector) -> "BirefringenceVector":
        """Build from a full 3-vector whose norm is the magnitude (s/m)."""
        v = np.asarray(vector, dtype=float)
        mag = float(np.linalg.norm(v))
        if mag == 0.0:
            return cls((0.0, 0.0, 1.0), 0.0)
        return cls(tuple(v / mag), mag)

    @property
    def vector(self) -> np.ndarray:
        return self.magnitude * np.asarray(self.direction)


# Named launch states: label -> Jones vector.  Poincare images in the
# package convention: H (0,0,1), V (0,0,-1), D (1,0,0), A (-1,0,0),
# L (0,1,0), R (0,-1,0).
PRESETS = {
    "H": JonesVector(1.0, 0.0),
    "V": JonesVector(0.0, 1.0),
    "D": JonesVector(2 ** -0.5, 2 ** -0.5),
    "A": JonesVector(2 ** -0.5, -(2 ** -0.5)),
    "L": JonesVector(2 ** -0.5, 1j * 2 ** -0.5),
    "R": JonesVector(2 ** -0.5, -1j * 2 ** -0.5),
}


def _as_jones(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.shape[-1:] != (2,):
        raise DomainError(f"Jones vectors need a trailing axis of length 2, got {psi.shape}")
    return psi


def jones_norm2(psi) -> np.ndarray:
    """Squared norm ``<psi|psi>`` along the last axis."""
    psi = _as_jones(psi)
    return np.sum(psi.real ** 2 + psi.imag ** 2, axis=-1)


def poincare_from_jones(psi) -> np.ndarray:
    """Map Jones vector(s) to unit Poincare vector(s).

    Parameters
    ----------
    psi : array_like, shape (..., 2)
        Jones vector or stack of Jones vectors, not necessarily normalized.

    Returns
    -------
    numpy.ndarray, shape (..., 3)
        ``<psi|sigma|psi> / <psi|psi>``.

    Raises
    ------
    DomainError
        If any input has zero norm.
    """
    psi = _as_jones(psi)
    a, b = psi[..., 0], psi[..., 1]
    n2 = jones_norm2(psi)
    if np.any(n2 <= 0) or not np.all(np.isfinite(n2)):
        raise DomainError("null Jones vector")
    ab = np.conj(a) * b
    s = np.stack([2 * ab.real, 2 * ab.imag, (abs(a) ** 2 - abs(b) ** 2)], axis=-1)
    return s / n2[..., None]


def trunk_propagator(omega, length: float, beta: BirefringenceVector) -> np.ndarray:
    """SU(2) propagator ``exp(i omega length beta.sigma / 2)`` of one trunk.

    ``omega`` may be a scalar or an array of angular frequencies (rad/s);
    the result has shape ``omega.shape + (2, 2)``.
    """
    if length < 0:
        raise DomainError("trunk length must be >= 0")
    omega = np.asarray(omega, dtype=float)
    theta = omega * length * beta.magnitude
    return _axis_angle_su2(np.asarray(beta.direction), theta)


def _axis_angle_su2(n: np.ndarray, theta) -> np.ndarray:
    """``cos(theta/2) I + i sin(theta/2) n.sigma`` for scalar/array theta."""
    half = 0.5 * np.asarray(theta, dtype=float)
    c = np.cos(half)
    s = np.sin(half)
    n1, n2, n3 = n
    out = np.empty(np.shape(half) + (2, 2), dtype=complex)
    out[..., 0, 0] = c + 1j * s * n3
    out[..., 0, 1] = 1j * s * n1 + s * n2
    out[..., 1, 0] = 1j * s * n1 - s * n2
    out[..., 1, 1] = c - 1j * s * n3
    return out


def unitarity_error(U) -> np.ndarray:
    """Frobenius norm of ``U^dagger U - I`` for a matrix or matrix stack."""
    U = np.asarray(U, dtype=complex)
    gram = np.conj(np.swapaxes(U, -1, -2)) @ U
    return np.linalg.norm(gram - IDENTITY, axis=(-2, -1))


def apply_propagator(U, psi) -> np.ndarray:
    """Apply a unitary (stack) to Jones vector(s).

    Raises
    ------
    DomainError
        If ``U`` deviates from unitarity by more than 1e-8.
    """
    U = np.asarray(U, dtype=complex)
    if np.any(unitarity_error(U) > _UNITARY_TOL):
        raise DomainError("propagator is not unitary")
    psi = _as_jones(psi)
    return np.einsum("...ij,...j->...i", U, psi)


def faraday_mirror(psi) -> np.ndarray:
    """Reflect off a Faraday mirror: ``(a, b) -> (-conj(b), conj(a))``.

    The output is orthogonal to the input and its Poincare vector is the
    antipode of the input's.  Norm is preserved.
    """
    psi = _as_jones(psi)
    if np.any(jones_norm2(psi) <= 0):
        raise DomainError("null Jones vector")
    return np.stack([-np.conj(psi[..., 1]), np.conj(psi[..., 0])], axis=-1)


def faraday_mirror_poincare(m) -> np.ndarray:
    """Faraday-mirror action on Poincare vectors (point reflection)."""
    return -np.asarray(m, dtype=float)


def poincare_rotation(U) -> np.ndarray:
    """3x3 rotation induced by an SU(2) matrix: ``R_ij = tr(s_i U s_j U^+)/2``."""
    U = np.asarray(U, dtype=complex)
    Ud = np.conj(np.swapaxes(U, -1, -2))
    R = np.einsum("iab,...bc,jcd,...da->...ij", PAULI, U, PAULI, Ud)
    return 0.5 * R.real
