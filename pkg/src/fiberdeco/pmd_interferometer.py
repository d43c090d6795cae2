"""Interferometric PMD measurement: synthesis and second-moment estimation.

Light from a broadband source is launched through a polarizer into the
fiber under test, passes an output analyzer and then a scanning two-arm
interferometer.  For an arm imbalance ``tau`` the detected intensity is

    I(tau) = sum_i c_i (1 + cos(omega_i tau)),
    c_i = w_i S_i |<p|U(omega_i)|psi_0>|^2,

i.e. the analyzer-projected spectrum Fourier-modulated by the delay.  A
fiber DGD ``dt`` re-coheres light at ``tau = +-dt`` so fringes show up far
outside the source coherence time.

The estimator follows the usual second-moment convention: the fringe
envelope is the magnitude of the analytic signal, the central source
autocorrelation is removed, and the RMS width ``sigma`` of what remains
(amplitude weighted) gives ``DGD = k sqrt(sigma^2 - sigma_src^2)`` with
``k = sqrt(3/4)`` for strongly mode-coupled fibers and ``k = 1`` for
fibers without mode coupling.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from dataclasses import field as dc_field

import numpy as np
from scipy.signal import czt, hilbert

from .errors import DomainError, NumericalError
from .fiber_model import FiberSpec, dgd_eigenanalysis, fiber_jones_matrix
from .polarization_core import C_LIGHT, jones_norm2
from .spectral_state import SourceSpectrum, make_spectral_state, spectral_rms_time

STRONG_COUPLING = math.sqrt(3.0 / 4.0)
NO_COUPLING = 1.0
EXCLUSION_RMS = 3.0

INTERFEROGRAM_COLUMNS = ("delay_s", "displacement_um", "intensity")


def delay_to_displacement(delay):
    """Interferometer delay (s) to mirror displacement (m): ``d = c tau / 2``."""
    return 0.5 * C_LIGHT * np.asarray(delay, dtype=float)


def displacement_to_delay(displacement):
    """Mirror displacement (m) to interferometer delay (s): ``tau = 2 d / c``."""
    return 2.0 * np.asarray(displacement, dtype=float) / C_LIGHT


@dataclass(frozen=True, eq=False)
class Interferogram:
    """Detected intensity versus interferometer delay.

    ``omega`` and ``coefficients`` keep the projected spectral weights
    ``c_i`` the record was synthesized from, for spectral-domain checks.
    """

    delays: np.ndarray
    intensity: np.ndarray
    meta: dict = dc_field(default_factory=dict)
    warnings: tuple = ()
    omega: np.ndarray | None = None
    coefficients: np.ndarray | None = None

    def __post_init__(self):
        d = np.asarray(self.delays, dtype=float)
        I = np.asarray(self.intensity, dtype=float)
        if d.ndim != 1 or d.shape != I.shape or d.size < 3:
            raise DomainError("delays and intensity must be matching 1-D arrays")
        if np.any(np.diff(d) <= 0):
            raise DomainError("delays must be strictly increasing")
        step = float(np.min(np.diff(d)))
        if abs(d[0] + d[-1]) > 1e-6 * step:
            raise DomainError("delay grid must be symmetric about 0")
        object.__setattr__(self, "delays", d)
        object.__setattr__(self, "intensity", I)
        object.__setattr__(self, "warnings", tuple(self.warnings))

    @property
    def step(self) -> float:
        return _step(self.delays)

    @property
    def displacement(self) -> np.ndarray:
        return delay_to_displacement(self.delays)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(INTERFEROGRAM_COLUMNS)
            for tau, disp, inten in zip(self.delays, self.displacement, self.intensity):
                writer.writerow([f"{tau:.9e}", f"{disp * 1e6:.6f}", repr(float(inten))])


@dataclass(frozen=True)
class PmdEstimate:
    delay: float
    coefficient: float
    envelope_rms: float
    method: str = "second-moment"
    warnings: tuple = ()

    def to_record(self) -> dict:
        return {
            "delay_ps": self.delay * 1e12,
            "coefficient_ps_sqrtkm": self.coefficient * 1e12 * math.sqrt(1e3),
            "envelope_rms_ps": self.envelope_rms * 1e12,
            "method": self.method,
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)


def pmd_coefficient(delay: float, length: float) -> float:
    """PMD coefficient ``delay / sqrt(length)`` in s/sqrt(m).

    Multiply by ``1e12 * sqrt(1e3)`` for ps/sqrt(km).
    """
    if not length > 0:
        raise DomainError("fiber length must be > 0")
    if delay < 0:
        raise DomainError("delay must be >= 0")
    return delay / math.sqrt(length)


def ps_per_sqrt_km(coefficient: float) -> float:
    return coefficient * 1e12 * math.sqrt(1e3)


def expected_dgd(fiber: FiberSpec, omega_center: float) -> float:
    """Scale of the fiber DGD used to size default scans, s."""
    if not fiber.trunks:
        return 0.0
    return max(fiber.rms_dgd_expectation(), float(dgd_eigenanalysis(fiber, omega_center)))


def default_scan(fiber: FiberSpec, spectrum: SourceSpectrum, span_dgd: float = 6.0,
                 span_tau_c: float = 6.0, span: float = 3.0) -> np.ndarray:
    """Symmetric uniform delay grid covering the expected envelope.

    Half-span ``span_dgd * DGD + span_tau_c * tau_c``; step the smaller of
    ``tau_c / 8`` and a quarter of the shortest optical period on the
    frequency grid, so the fringes themselves are resolved.
    """
    tau_c = spectrum.coherence_time()
    half = span_dgd * expected_dgd(fiber, spectrum.omega_center) + span_tau_c * tau_c
    omega_max = spectrum.omega_center + span * spectrum.omega_width
    step = min(tau_c / 8, math.pi / (2 * omega_max))
    m = int(math.ceil(half / step))
    return np.arange(-m, m + 1) * step


def _fringe_sum_direct(omega, c, delays) -> np.ndarray:
    out = np.empty_like(delays)
    for k0 in range(0, delays.size, 256):
        sl = slice(k0, k0 + 256)
        out[sl] = np.cos(np.outer(delays[sl], omega)) @ c
    return out


def _step(x: np.ndarray) -> float:
    # end-to-end spacing: neighbour differences lose ~1e-12 relative at optical scales
    return float((x[-1] - x[0]) / (x.size - 1))


def _fringe_sum_fft(omega, c, delays, m: int) -> np.ndarray:
    """Spectral sum via one FFT when ``d_omega * d_tau * m == 2 pi``."""
    dw = 2 * math.pi / (m * _step(delays))
    n = np.arange(omega.size)
    x = np.zeros(m, dtype=complex)
    x[:omega.size] = c * np.exp(1j * n * dw * delays[0])
    Z = np.fft.ifft(x)[:delays.size] * m
    return (np.exp(1j * omega[0] * delays) * Z).real


def _fringe_sum_czt(omega, c, delays, block: int = 512) -> np.ndarray:
    """``sum_i c_i cos(omega_i tau_k)`` for uniform omega and tau grids.

    ``exp(i (w0 + n dw)(t0 + k dt)) = exp(i w0 t_k) exp(i n dw t0) W^(nk)``
    with ``W = exp(i dw dt)``, which is a chirp-z transform.  The transform
    raises ``W`` to powers ~k^2, amplifying its phase rounding; short delay
    blocks keep that error near 1e-10 of the DC level.
    """
    dw = _step(omega)
    dt = _step(delays)
    n = np.arange(omega.size)
    w = np.exp(1j * dw * dt)
    out = np.empty_like(delays)
    for k0 in range(0, delays.size, block):
        t = delays[k0:k0 + block]
        x = c * np.exp(1j * n * dw * t[0])
        Z = czt(x, m=t.size, w=w, a=1.0)
        out[k0:k0 + block] = (np.exp(1j * omega[0] * t) * Z).real
    return out


def synthesize_interferogram(fiber: FiberSpec, spectrum: SourceSpectrum, polarizer, scan=None,
                             launch=None, n_samples: int | None = None, span: float = 3.0,
                             noise_rms: float = 0.0, seed: int | None = None,
                             method: str = "auto") -> Interferogram:
    """Interferogram of fiber output light behind an analyzer.

    Parameters
    ----------
    fiber : FiberSpec
    spectrum : SourceSpectrum
    polarizer : JonesVector or array_like
        Output analyzer axis ``p``.
    scan : array_like, optional
        Symmetric, uniform delay grid in s; :func:`default_scan` if omitted.
    launch : JonesVector or array_like, optional
        Input polarization; defaults to ``polarizer`` (same axis at input and
        output).
    n_samples : int, optional
        Frequency samples.  By default the frequency step is tied to the
        delay step (``d_omega d_tau = 2 pi / M``, ``M`` a power of two at
        least twice the number of delays), which makes the spectral sum's
        alias period at least four times the scan half-span.  The grid then
        extends slightly beyond ``span`` widths.
    noise_rms : float
        Standard deviation of optional additive gaussian detector noise.
    method : {"auto", "fft", "czt", "direct"}
        Evaluation of the spectral sum.  ``auto`` uses the FFT on the default
        frequency grid and the chirp-z transform otherwise; ``direct`` is the
        plain O(N M) sum.
    """
    p = np.asarray(polarizer, dtype=complex)
    p = p / math.sqrt(jones_norm2(p))
    psi0 = p if launch is None else np.asarray(launch, dtype=complex)
    delays = default_scan(fiber, spectrum, span=span) if scan is None else np.asarray(scan, float)
    if delays.size > 2 and np.ptp(np.diff(delays)) > 1e-6 * _step(delays):
        raise DomainError("scan grid must be uniform")
    m_fft = None
    grid_span = span
    if n_samples is None:
        m_fft = 1 << int(math.ceil(math.log2(2 * delays.size)))
        dw = 2 * math.pi / (m_fft * _step(delays))
        n_samples = max(64, int(math.ceil(2 * span * spectrum.omega_width / dw)) + 1)
        grid_span = dw * (n_samples - 1) / (2 * spectrum.omega_width)
    state = make_spectral_state(spectrum, psi0, n_samples, grid_span)
    U = fiber_jones_matrix(fiber, state.omega)
    amp = np.einsum("i,nij,nj->n", np.conj(p), U, state.field)
    c = state.weights * state.density * np.abs(amp) ** 2
    if method == "auto":
        method = "fft" if m_fft else "czt"
    if method == "fft":
        if m_fft is None:
            raise DomainError("fft synthesis needs the default frequency grid (n_samples=None)")
        fringe = _fringe_sum_fft(state.omega, c, delays, m_fft)
    elif method == "czt":
        fringe = _fringe_sum_czt(state.omega, c, delays)
    elif method == "direct":
        fringe = _fringe_sum_direct(state.omega, c, delays)
    else:
        raise DomainError(f"unknown synthesis method {method!r}")
    intensity = c.sum() + fringe
    warnings = []
    edge = max(1, delays.size // 20)
    env = np.abs(hilbert(fringe))
    if max(env[:edge].max(), env[-edge:].max()) > 1e-2 * env.max():
        warnings.append("scan may truncate the fringe envelope")
    if noise_rms > 0:
        rng = np.random.Generator(np.random.PCG64(seed))
        intensity = intensity + rng.normal(0.0, noise_rms, delays.size)
    meta = {
        "spectrum": spectrum,
        "fiber_length": fiber.total_length,
        "n_trunks": len(fiber.trunks),
        "polarizer": tuple(p),
        "source_rms": spectral_rms_time(state),
    }
    return Interferogram(delays, np.clip(intensity, 0.0, None), meta, tuple(warnings),
                         state.omega, c)


def fringe_envelope(gram: Interferogram) -> np.ndarray:
    """Magnitude of the analytic signal of the AC part of the interferogram."""
    return np.abs(hilbert(gram.intensity - gram.intensity.mean()))


def fringe_energy(gram: Interferogram) -> float:
    """``sum_k (I_k - DC)^2 dtau`` with DC taken from the stored spectrum."""
    dc = float(np.sum(gram.coefficients))
    return float(np.sum((gram.intensity - dc) ** 2) * gram.step)


def spectral_fringe_energy(gram: Interferogram) -> float:
    """Spectral-domain counterpart of :func:`fringe_energy`.

    Over one alias period ``T = 2 pi / d_omega`` the cosines are orthogonal,
    so the fringe energy is ``(T / 2) sum c_i^2``; it equals the scan-domain
    value when the envelope has decayed inside the scan.
    """
    dw = _step(gram.omega)
    return float(math.pi / dw * np.sum(gram.coefficients ** 2))


def estimate_pmd(gram: Interferogram, source_rms: float | None = None,
                 sigma_to_dgd: float = STRONG_COUPLING, exclusion: float = EXCLUSION_RMS,
                 length: float | None = None, snr_min: float = 10.0,
                 cross_floor: float = 1e-3) -> PmdEstimate:
    """Second-moment PMD estimate from an interferogram.

    Parameters
    ----------
    gram : Interferogram
    source_rms : float, optional
        RMS width of the source autocorrelation envelope, s; taken from
        ``gram.meta`` when omitted.
    sigma_to_dgd : float
        Conversion from envelope RMS to DGD: :data:`STRONG_COUPLING`
        (``sqrt(3/4)``) or :data:`NO_COUPLING` (1).
    exclusion : float
        Half-width, in units of ``source_rms``, of the excluded central zone.
    length : float, optional
        Fiber length for the coefficient; defaults to ``gram.meta``.

    Raises
    ------
    NumericalError
        If the envelope peak does not exceed ``snr_min`` times the noise floor.
    """
    if source_rms is None:
        source_rms = gram.meta.get("source_rms")
    if source_rms is None or not source_rms > 0:
        raise DomainError("source_rms must be > 0")
    if length is None:
        length = gram.meta.get("fiber_length", 0.0)
    tau = gram.delays
    env = fringe_envelope(gram)
    peak = float(env.max())
    edge = max(1, tau.size // 10)
    floor = float(np.median(np.concatenate([env[:edge], env[-edge:]])))
    if not peak > 0 or peak < snr_min * floor:
        raise NumericalError(f"envelope SNR below threshold ({peak:.3g} vs floor {floor:.3g})")
    # the central peak is removed twice over: an exclusion zone, plus the
    # gaussian autocorrelation model outside it
    model = peak * np.exp(-0.5 * (tau / source_rms) ** 2)
    w = np.clip(env - model - floor, 0.0, None)
    w[np.abs(tau) < exclusion * source_rms] = 0.0
    warnings = list(gram.warnings)
    if w.max() < cross_floor * peak:
        warnings.append("no cross-correlation above floor; delay set to 0")
        return PmdEstimate(0.0, 0.0, 0.0, warnings=tuple(warnings))
    sigma = math.sqrt(float(np.sum(tau ** 2 * w) / np.sum(w)))
    delay = sigma_to_dgd * math.sqrt(max(0.0, sigma ** 2 - source_rms ** 2))
    coeff = pmd_coefficient(delay, length) if length > 0 else float("nan")
    return PmdEstimate(delay, coeff, sigma, warnings=tuple(warnings))
