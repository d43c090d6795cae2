"""Broadband photons as frequency-sampled Jones fields.

A :class:`SpectralState` stores, on a grid of angular frequencies, the Jones
vector of every spectral component together with a normalized spectral
density.  The spectrally averaged Poincare vector is a convex average of
the per-frequency (unit) Poincare vectors, so its norm is the degree of
polarization.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from dataclasses import field as dc_field
from pathlib import Path

import numpy as np

from .errors import DomainError
from .polarization_core import C_LIGHT, jones_norm2, poincare_from_jones

logger = logging.getLogger(__name__)

#: Transform-limited time-bandwidth product of a gaussian (FWHM x FWHM).
GAUSSIAN_TBP = 2 * math.log(2) / math.pi
_FWHM_PER_SIGMA = 2 * math.sqrt(2 * math.log(2))

CSV_COLUMNS = ("omega_rad_s", "density", "re_a", "im_a", "re_b", "im_b")


def wavelength_to_omega(wavelength):
    """Vacuum wavelength (m) to angular frequency (rad/s)."""
    return 2 * math.pi * C_LIGHT / np.asarray(wavelength, dtype=float)


def omega_to_wavelength(omega):
    """Angular frequency (rad/s) to vacuum wavelength (m)."""
    return 2 * math.pi * C_LIGHT / np.asarray(omega, dtype=float)


def trapezoid_weights(omega: np.ndarray) -> np.ndarray:
    """Trapezoidal quadrature weights for an increasing (possibly uneven) grid."""
    omega = np.asarray(omega, dtype=float)
    if omega.size == 1:
        return np.ones(1)
    d = np.diff(omega)
    w = np.zeros_like(omega)
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    return w


@dataclass(frozen=True)
class SourceSpectrum:
    """Spectral line shape of a source.

    Parameters
    ----------
    shape : {"gaussian", "rectangular"}
    center : float
        Center vacuum wavelength, m.
    width : float
        Wavelength FWHM (gaussian) or full width (rectangular), m.
    """

    shape: str
    center: float
    width: float

    def __post_init__(self):
        if self.shape not in ("gaussian", "rectangular"):
            raise DomainError(f"unknown spectrum shape {self.shape!r}")
        if not self.center > 0:
            raise DomainError("spectrum center wavelength must be > 0")
        if not 0 <= self.width < self.center:
            raise DomainError("non-physical spectrum: need 0 <= width < center")

    @property
    def omega_center(self) -> float:
        return float(wavelength_to_omega(self.center))

    @property
    def omega_width(self) -> float:
        """Width converted to angular frequency using the exact band edges."""
        half = 0.5 * self.width
        return float(2 * math.pi * C_LIGHT * (1 / (self.center - half) - 1 / (self.center + half)))

    @property
    def omega_std(self) -> float:
        """Standard deviation of the spectral density in angular frequency."""
        if self.shape == "gaussian":
            return self.omega_width / _FWHM_PER_SIGMA
        return self.omega_width / math.sqrt(12)

    def density(self, omega) -> np.ndarray:
        """Unnormalized spectral density at angular frequencies ``omega``."""
        x = np.asarray(omega, dtype=float) - self.omega_center
        if self.shape == "gaussian":
            return np.exp(-0.5 * (x / self.omega_std) ** 2)
        return (np.abs(x) <= 0.5 * self.omega_width).astype(float)

    def coherence_time(self) -> float:
        """Transform-limited FWHM time scale, ``TBP / delta_nu``.

        Uses the gaussian time-bandwidth product ``2 ln2 / pi`` for every
        shape; for a gaussian it equals the FWHM of the intensity of the
        transform-limited pulse with this power spectrum.
        """
        return GAUSSIAN_TBP / (self.omega_width / (2 * math.pi))

    @classmethod
    def for_coherence_time(cls, center: float, tau_c: float, shape: str = "gaussian"):
        """Gaussian-TBP spectrum whose :meth:`coherence_time` equals ``tau_c``."""
        dnu = GAUSSIAN_TBP / tau_c
        # c/(l0 - w/2) - c/(l0 + w/2) = dnu  <=>  (dnu/4) w^2 + c w - dnu l0^2 = 0
        a, b, cc = dnu / 4, C_LIGHT, -dnu * center ** 2
        width = (-b + math.sqrt(b * b - 4 * a * cc)) / (2 * a)
        return cls(shape, center, width)


@dataclass(frozen=True, eq=False)
class SpectralGrid:
    """Angular-frequency samples (rad/s) and their quadrature weights."""

    omega: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        omega = np.array(self.omega, dtype=float)
        weights = np.array(self.weights, dtype=float)
        if omega.ndim != 1 or omega.shape != weights.shape or omega.size == 0:
            raise DomainError("grid samples and weights must be matching 1-D arrays")
        if np.any(np.diff(omega) <= 0):
            raise DomainError("grid frequencies must be strictly increasing")
        if np.any(omega <= 0):
            raise DomainError("grid frequencies must be positive")
        if np.any(weights < 0):
            raise DomainError("quadrature weights must be >= 0")
        omega.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return self.omega.size


@dataclass(frozen=True, eq=False)
class SpectralState:
    """A photon: per-frequency Jones vectors and a unit-integral density."""

    grid: SpectralGrid
    field: np.ndarray
    density: np.ndarray
    meta: dict = dc_field(default_factory=dict, compare=False)

    def __post_init__(self):
        fld = np.array(self.field, dtype=complex)
        dens = np.array(self.density, dtype=float)
        n = len(self.grid)
        if fld.shape != (n, 2) or dens.shape != (n,):
            raise DomainError("field and density must match the grid length")
        if np.any(dens < 0):
            raise DomainError("spectral density must be >= 0")
        total = float(np.dot(self.grid.weights, dens))
        if abs(total - 1.0) > 1e-9:
            raise DomainError(f"spectral density integrates to {total}, expected 1")
        fld.flags.writeable = False
        dens.flags.writeable = False
        object.__setattr__(self, "field", fld)
        object.__setattr__(self, "density", dens)

    @classmethod
    def from_arrays(cls, omega, field, density, weights=None, meta=None) -> "SpectralState":
        """Build a state, normalizing ``density`` against the quadrature weights.

        Trapezoidal weights are used when ``weights`` is omitted.
        """
        omega = np.asarray(omega, dtype=float)
        w = trapezoid_weights(omega) if weights is None else np.asarray(weights, dtype=float)
        dens = np.asarray(density, dtype=float)
        total = float(np.dot(w, dens))
        if not total > 0:
            raise DomainError("spectral density has zero integral")
        return cls(SpectralGrid(omega, w), field, dens / total, dict(meta or {}))

    @property
    def omega(self) -> np.ndarray:
        return self.grid.omega

    @property
    def weights(self) -> np.ndarray:
        return self.grid.weights

    def with_field(self, field) -> "SpectralState":
        """Same grid and density, new per-frequency Jones vectors."""
        return SpectralState(self.grid, field, self.density, dict(self.meta))

    def poincare(self) -> np.ndarray:
        """Per-frequency unit Poincare vectors, shape (n, 3)."""
        return poincare_from_jones(self.field)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for w, d, (a, b) in zip(self.omega, self.density, self.field):
                writer.writerow([repr(float(w)), repr(float(d)), repr(float(a.real)),
                                 repr(float(a.imag)), repr(float(b.real)), repr(float(b.imag))])

    @classmethod
    def from_csv(cls, path) -> "SpectralState":
        """Read a state written by :meth:`to_csv` (trapezoidal weights assumed)."""
        rows = list(csv.DictReader(Path(path).open(newline="")))
        if not rows or tuple(rows[0].keys()) != CSV_COLUMNS:
            raise DomainError(f"{path}: expected columns {', '.join(CSV_COLUMNS)}")
        arr = np.array([[float(r[k]) for k in CSV_COLUMNS] for r in rows])
        fld = np.stack([arr[:, 2] + 1j * arr[:, 3], arr[:, 4] + 1j * arr[:, 5]], axis=-1)
        return cls.from_arrays(arr[:, 0], fld, arr[:, 1])


def make_spectral_state(spectrum: SourceSpectrum, polarization, n_samples: int = 512,
                        span: float = 3.0) -> SpectralState:
    """Fully polarized broadband state with a uniform launch polarization.

    Parameters
    ----------
    spectrum : SourceSpectrum
    polarization : JonesVector or array_like
        Launch polarization shared by every spectral component.
    n_samples : int
        Number of frequency samples; 1 gives a monochromatic state at the
        center frequency.
    span : float
        Half-extent of the uniform grid in multiples of the spectral width
        (the grid covers ``center +- span * width`` in angular frequency).
    """
    psi = np.asarray(polarization, dtype=complex)
    if jones_norm2(psi) <= 0:
        raise DomainError("null Jones vector")
    psi = psi / math.sqrt(jones_norm2(psi))
    meta = {"spectrum": spectrum}
    if n_samples == 1 or spectrum.width == 0:
        omega = np.array([spectrum.omega_center])
        return SpectralState.from_arrays(omega, psi[None, :], np.ones(1), meta=meta)
    if n_samples < 3:
        raise DomainError("n_samples must be 1 or >= 3")
    if not span > 0:
        raise DomainError("span must be > 0")
    w0, dw = spectrum.omega_center, span * spectrum.omega_width
    if w0 - dw <= 0:
        raise DomainError("frequency grid reaches non-positive frequencies; reduce span")
    omega = np.linspace(w0 - dw, w0 + dw, n_samples)
    field_ = np.broadcast_to(psi, (n_samples, 2)).copy()
    return SpectralState.from_arrays(omega, field_, spectrum.density(omega), meta=meta)


def mean_polarization(state: SpectralState) -> np.ndarray:
    """Density-weighted spectral average of the Poincare vectors."""
    return (state.weights * state.density) @ state.poincare()


def degree_of_polarization(state: SpectralState) -> float:
    """Norm of :func:`mean_polarization`, clamped to [0, 1]."""
    dop = float(np.linalg.norm(mean_polarization(state)))
    if dop > 1.0:
        if dop - 1.0 > 1e-9:
            logger.warning("degree of polarization %.12g exceeds 1; clamped", dop)
        dop = 1.0
    return dop


def spectral_rms_time(state: SpectralState) -> float:
    """Reciprocal of the spectral standard deviation, s.

    For a gaussian spectrum this is the RMS width of the fringe-visibility
    envelope measured with amplitude weights.
    """
    p = state.weights * state.density
    mean = p @ state.omega
    var = p @ (state.omega - mean) ** 2
    if not var > 0:
        raise DomainError("monochromatic state has no finite coherence time")
    return 1.0 / math.sqrt(var)
