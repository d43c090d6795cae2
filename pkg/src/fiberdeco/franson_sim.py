"""Franson two-photon interferometry with chromatic dispersion.

A monochromatic pump splits into photon pairs with ``omega_1 = omega_p/2 +
Delta`` (sent to analyzer A) and ``omega_2 = omega_p/2 - Delta`` (analyzer
B).  Each photon crosses its own fiber, whose group delay is quadratic about
the zero-dispersion wavelength ``lambda_0`` (linear dispersion ``D(lambda) =
S0 (lambda - lambda_0)``), then an unbalanced interferometer with imbalance
``dT``.  Coincidences inside a window shorter than ``dT`` select the
short-short and long-long paths, whose amplitudes add; short-long events
leak in only when dispersion smears the pair's relative arrival time by
about ``dT``.

:func:`coincidence_rate` is the production model: per detuning sample it
takes the relative group delay, spreads it over the sample's cell plus the
intrinsic pair correlation time, and weights paths by their fractional
overlap with the window.  :func:`coincidence_oracle` builds the two-photon
wavepacket in the time domain by FFT and integrates it over the window.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConvergenceWarning, DomainError
from .polarization_core import C_LIGHT

#: 1 ps/(nm^2 km) in s/m^3.
PS_PER_NM2_KM = 1e3
DEFAULT_SLOPE = 0.092 * PS_PER_NM2_KM
DEFAULT_LAMBDA0 = 1310e-9
DEFAULT_VALIDITY = 60e-9

BELL_THRESHOLD = 1 / math.sqrt(2)
OUT_OF_BAND = ("exclude", "extrapolate", "error")
_BAND_RTOL = 1e-12  # band edges survive the rounding of lambda0 +- validity

SWEEP_COLUMNS = ("detuning_nm", "length_km", "visibility", "S_value", "violated")
FRINGE_COLUMNS = ("phase_rad", "rate")


@dataclass(frozen=True)
class DispersionProfile:
    """Quadratic group-delay model of one fiber arm.

    ``slope`` is the dispersion slope S0 in s/m^3 (0.092 ps/(nm^2 km) is
    92 s/m^3); ``validity`` is the half-width of the wavelength band around
    ``lambda0`` where the linear-dispersion approximation is trusted.
    """

    lambda0: float = DEFAULT_LAMBDA0
    slope: float = DEFAULT_SLOPE
    length: float = 0.0
    validity: float = DEFAULT_VALIDITY

    def __post_init__(self):
        if not self.lambda0 > 0:
            raise DomainError("lambda0 must be > 0")
        if not self.length >= 0:
            raise DomainError("fiber length must be >= 0")
        if not self.validity > 0:
            raise DomainError("validity band must be > 0")


def _group_delay(lam, profile: DispersionProfile):
    return 0.5 * profile.slope * (np.asarray(lam, dtype=float) - profile.lambda0) ** 2 * profile.length


def group_delay(lam, profile: DispersionProfile):
    """Relative group delay ``(S0/2) (lambda - lambda0)^2 L`` in s.

    Raises
    ------
    DomainError
        If any wavelength lies outside ``lambda0 +- profile.validity``.
    """
    lam = np.asarray(lam, dtype=float)
    if np.any(np.abs(lam - profile.lambda0) > profile.validity * (1 + _BAND_RTOL)):
        raise DomainError(
            f"wavelength outside the dispersion model's validity band "
            f"{profile.lambda0 * 1e9:.1f} +- {profile.validity * 1e9:.1f} nm")
    out = _group_delay(lam, profile)
    return float(out) if out.ndim == 0 else out


def group_delay_spread(profile: DispersionProfile, center: float, half_width: float) -> float:
    """Max minus min group delay over ``center +- half_width``, s."""
    lo, hi = center - half_width, center + half_width
    cand = [lo, hi]
    if lo < profile.lambda0 < hi:
        cand.append(profile.lambda0)
    gd = _group_delay(np.array(cand), profile)
    return float(gd.max() - gd.min())


def spectral_phase(omega, profile: DispersionProfile):
    """Fiber spectral phase whose frequency derivative is the group delay.

    With ``x = omega / omega_0 - 1`` (``omega_0`` at ``lambda0``)::

        phi = (S0 L / 2) lambda0^2 omega_0 (x - 2 log(1 + x) + x / (1 + x))

    which vanishes, with its first two derivatives, at ``lambda0``.
    """
    omega = np.asarray(omega, dtype=float)
    w0 = 2 * math.pi * C_LIGHT / profile.lambda0
    x = omega / w0 - 1.0
    k = 0.5 * profile.slope * profile.length * profile.lambda0 ** 2 * w0
    return k * (x - 2 * np.log1p(x) + x / (1 + x))


def conjugate_wavelength(lambda1, pump_frequency: float):
    """Partner wavelength from exact energy conservation ``nu1 + nu2 = nu_p``.

    ``pump_frequency`` is angular (rad/s).
    """
    lambda1 = np.asarray(lambda1, dtype=float)
    nu2 = pump_frequency / (2 * math.pi) - C_LIGHT / lambda1
    if np.any(nu2 <= 0):
        raise DomainError("conjugate photon would have non-positive frequency")
    out = C_LIGHT / nu2
    return float(out) if out.ndim == 0 else out


def _half_width_to_omega(center: float, half_width: float) -> float:
    # average of the two exact band-edge offsets
    return math.pi * C_LIGHT * (1 / (center - half_width) - 1 / (center + half_width))


@dataclass(frozen=True, eq=False)
class BiphotonEnsemble:
    """Frequency-anticorrelated pairs on a symmetric detuning grid.

    ``detuning`` holds ``Delta`` (rad/s) with photon A at ``omega_p/2 +
    Delta`` and photon B at ``omega_p/2 - Delta``; ``weights`` is the joint
    spectral density times the quadrature weight, summing to 1.
    """

    pump_frequency: float
    detuning: np.ndarray
    weights: np.ndarray
    center: float
    half_width: float
    shape: str = "gaussian"
    span: float = 4.0

    def __post_init__(self):
        d = np.array(self.detuning, dtype=float)
        w = np.array(self.weights, dtype=float)
        if d.ndim != 1 or d.shape != w.shape:
            raise DomainError("detuning and weights must be matching 1-D arrays")
        if np.any(w < 0) or abs(w.sum() - 1) > 1e-9:
            raise DomainError("ensemble weights must be >= 0 and sum to 1")
        if not np.allclose(d, -d[::-1], rtol=0, atol=1e-9 * np.abs(d).max()):
            raise DomainError("detuning grid must be symmetric")
        object.__setattr__(self, "detuning", d)
        object.__setattr__(self, "weights", w)

    @property
    def omega_a(self) -> np.ndarray:
        return 0.5 * self.pump_frequency + self.detuning

    @property
    def omega_b(self) -> np.ndarray:
        return 0.5 * self.pump_frequency - self.detuning

    @property
    def omega_half_width(self) -> float:
        return _half_width_to_omega(self.center, self.half_width)

    def density(self, detuning) -> np.ndarray:
        """Unnormalized joint spectral density at ``detuning`` (rad/s)."""
        x = np.asarray(detuning, dtype=float) / self.omega_half_width
        if self.shape == "gaussian":
            return np.exp(-math.log(2) * x ** 2)
        return (np.abs(x) <= 1.0).astype(float)

    def refined(self) -> "BiphotonEnsemble":
        """Same spectrum with the grid step halved."""
        return make_biphoton_ensemble(self.center, self.half_width, self.shape,
                                      2 * self.detuning.size - 1, self.span)

    def correlation_time(self) -> float:
        """RMS width of the dispersion-free relative-time wavepacket ``|f(t)|^2``, s."""
        var = math.fsum(self.weights * self.detuning ** 2)
        return 1.0 / (2.0 * math.sqrt(var))


def make_biphoton_ensemble(center: float, half_width: float, shape: str = "gaussian",
                           n_samples: int = 2001, span: float = 4.0) -> BiphotonEnsemble:
    """Pair spectrum around the degenerate wavelength ``center``.

    Parameters
    ----------
    center : float
        Degenerate wavelength, m; the pump sits at twice its frequency.
    half_width : float
        Half width at half maximum (gaussian) or half extent (rectangular)
        of each photon's spectrum, m, converted exactly to frequency.
    n_samples : int
        Odd number of detuning samples.
    span : float
        Grid half-extent in half-widths (gaussian); rectangular grids cover
        the band edge to edge.
    """
    if shape not in ("gaussian", "rectangular"):
        raise DomainError(f"unknown pair spectrum shape {shape!r}")
    if not 0 < half_width < center:
        raise DomainError("need 0 < half_width < center")
    if n_samples < 3 or n_samples % 2 == 0:
        raise DomainError("n_samples must be odd and >= 3")
    pump = 2 * 2 * math.pi * C_LIGHT / center
    hw = _half_width_to_omega(center, half_width)
    extent = span * hw if shape == "gaussian" else hw
    half = np.linspace(0.0, extent, n_samples // 2 + 1)
    det = np.concatenate([-half[:0:-1], half])
    proto = BiphotonEnsemble(pump, det, np.full(det.size, 1 / det.size), center, half_width,
                             shape, span)
    step = det[1] - det[0]
    q = np.full(det.size, step)
    q[[0, -1]] *= 0.5
    w = proto.density(det) * q
    return replace(proto, weights=w / w.sum())


@dataclass(frozen=True)
class FransonConfig:
    """Interferometer and fiber settings.

    Phases are applied to the long arms; the pump phase ``omega_p dT`` is
    added to the long-long path automatically.  ``visibility_factor`` < 1
    adds a flat background (accidentals, jitter) scaling the visibility.

    ``out_of_band`` selects how pairs with a photon outside a dispersive
    arm's validity band are handled: ``"exclude"`` drops them (as a filter
    matched to the model would), ``"extrapolate"`` applies the quadratic
    delay anyway and ``"error"`` raises :class:`DomainError`.  A warning is
    attached whenever pairs fall outside the band.
    """

    arm_imbalance: float = 1.2e-9
    coincidence_window: float = 300e-12
    phase_a: float = 0.0
    phase_b: float = 0.0
    profile_a: DispersionProfile = DispersionProfile()
    profile_b: DispersionProfile = DispersionProfile()
    n_phases: int = 64
    visibility_factor: float = 1.0
    out_of_band: str = "exclude"

    def __post_init__(self):
        if self.out_of_band not in OUT_OF_BAND:
            raise DomainError(f"out_of_band must be one of {', '.join(OUT_OF_BAND)}")
        if not self.coincidence_window > 0:
            raise DomainError("coincidence window must be > 0")
        if not self.arm_imbalance > self.coincidence_window:
            raise DomainError("arm imbalance must exceed the coincidence window")
        if self.n_phases < 32 or self.n_phases % 2:
            raise DomainError("phase sweep needs an even number >= 32 of points")
        if not 0 < self.visibility_factor <= 1:
            raise DomainError("visibility_factor must lie in (0, 1]")


@dataclass(frozen=True)
class CoincidenceResult:
    rate: float
    phases: np.ndarray
    rates: np.ndarray
    visibility: float
    warnings: tuple = ()

    @property
    def curve(self) -> list[tuple[float, float]]:
        return list(zip(self.phases.tolist(), self.rates.tolist()))


def visibility(curve) -> float:
    """Fringe visibility ``(max - min) / (max + min)`` of (phase, rate) pairs."""
    arr = np.asarray(curve, dtype=float)
    if arr.size == 0:
        raise DomainError("empty fringe curve")
    rates = arr[:, 1] if arr.ndim == 2 else arr
    if arr.ndim == 2 and np.unique(arr[:, 0]).size < 3:
        raise DomainError("visibility needs at least 3 distinct phases")
    if np.any(rates < 0):
        raise DomainError("rates must be >= 0")
    hi, lo = float(rates.max()), float(rates.min())
    if hi + lo == 0:
        return 0.0
    return (hi - lo) / (hi + lo)


def harmonic_visibility(rates) -> float:
    """Visibility of a first-order fringe sampled uniformly over one period.

    The windowed rate is exactly ``a + b cos(phi + phi0)`` in the phase sum,
    so its continuous extrema follow from the first DFT harmonic and do not
    depend on where the samples fall.
    """
    rates = np.asarray(rates, dtype=float)
    if rates.size < 3:
        raise DomainError("harmonic visibility needs at least 3 samples")
    spec = np.fft.rfft(rates)
    mean = spec[0].real / rates.size
    if mean <= 0:
        return 0.0
    return min(1.0, 2 * abs(spec[1]) / rates.size / mean)


def chsh_check(v: float) -> tuple[float, bool]:
    """CHSH value ``S = 2 sqrt(2) V`` and whether it exceeds 2.

    ``V = 1/sqrt(2)`` (to within rounding) is the boundary and is not a
    violation.
    """
    if not 0 <= v <= 1:
        raise DomainError("visibility must lie in [0, 1]")
    if math.isclose(v, BELL_THRESHOLD, rel_tol=4e-16, abs_tol=0.0):
        return 2.0, False
    s = 2 * math.sqrt(2) * v
    return s, s > 2.0


def _sweep_phases(config: FransonConfig) -> np.ndarray:
    return np.linspace(0.0, 2 * math.pi, config.n_phases, endpoint=False)


def _aligned_phases(rates_fn, config: FransonConfig) -> np.ndarray:
    """Uniform sweep of [0, 2 pi) shifted so that it contains the fringe maximum.

    The rate is exactly ``a + b cos(phi + phi0)``; ``phi0`` is read off the
    first harmonic of a preliminary sweep.  With an even number of points
    the minimum is sampled too, so max/min of the curve are the true extrema.
    """
    probe = _sweep_phases(config)
    phi0 = float(np.angle(np.fft.rfft(rates_fn(probe))[1]))
    return np.sort(np.mod(probe - phi0, 2 * math.pi))


def _finish(rates_fn, config: FransonConfig, warns) -> CoincidenceResult:
    phase_sum = _aligned_phases(rates_fn, config)
    rates = rates_fn(phase_sum)
    here = float(rates_fn(np.array([config.phase_a + config.phase_b]))[0])
    if config.visibility_factor < 1:
        bg = 0.5 * (rates.max() + rates.min()) * (1 / config.visibility_factor - 1)
        rates = rates + bg
        here += bg
    curve = np.column_stack([phase_sum, rates])
    return CoincidenceResult(here, phase_sum, rates, visibility(curve), tuple(warns))


def _band_mask(detuning, ensemble: BiphotonEnsemble, config: FransonConfig) -> np.ndarray:
    """True where both photons lie inside the validity band of a dispersive arm."""
    ok = np.ones(np.shape(detuning), dtype=bool)
    for sign, prof in ((1.0, config.profile_a), (-1.0, config.profile_b)):
        if prof.length > 0:
            lam = 2 * math.pi * C_LIGHT / (0.5 * ensemble.pump_frequency + sign * detuning)
            ok &= np.abs(lam - prof.lambda0) <= prof.validity * (1 + _BAND_RTOL)
    return ok


def _band_weights(ensemble: BiphotonEnsemble, config: FransonConfig):
    """Pair weights after the out-of-band policy, plus any warnings."""
    mask = _band_mask(ensemble.detuning, ensemble, config)
    lost = math.fsum(ensemble.weights[~mask])
    if lost <= 1e-6:
        return ensemble.weights, mask, []
    if config.out_of_band == "error":
        raise DomainError(f"{lost:.2%} of the pair spectrum lies outside the dispersion "
                          "model's validity band")
    if config.out_of_band == "extrapolate":
        return ensemble.weights, np.ones_like(mask), [
            f"{lost:.2%} of pairs extrapolated beyond the dispersion validity band"]
    return np.where(mask, ensemble.weights, 0.0), mask, [
        f"{lost:.2%} of pairs outside the dispersion validity band excluded"]


def relative_delay(ensemble: BiphotonEnsemble, config: FransonConfig, detuning=None) -> np.ndarray:
    """Arrival-time difference ``T_A(lambda_1) - T_B(lambda_2)`` per detuning, s."""
    det = ensemble.detuning if detuning is None else np.asarray(detuning, dtype=float)
    lam_a = 2 * math.pi * C_LIGHT / (0.5 * ensemble.pump_frequency + det)
    lam_b = 2 * math.pi * C_LIGHT / (0.5 * ensemble.pump_frequency - det)
    return _group_delay(lam_a, config.profile_a) - _group_delay(lam_b, config.profile_b)


def _overlap_fraction(lo, hi, center, width):
    a = np.maximum(lo, center - 0.5 * width)
    b = np.minimum(hi, center + 0.5 * width)
    return np.clip(b - a, 0.0, None) / (hi - lo)


def _path_windows(ensemble: BiphotonEnsemble, config: FransonConfig):
    det = ensemble.detuning
    edges = np.concatenate([[det[0]], 0.5 * (det[1:] + det[:-1]), [det[-1]]])
    d_mid = relative_delay(ensemble, config)
    d_edge = relative_delay(ensemble, config, edges)
    lo = np.minimum(np.minimum(d_edge[:-1], d_edge[1:]), d_mid)
    hi = np.maximum(np.maximum(d_edge[:-1], d_edge[1:]), d_mid)
    smear = math.sqrt(12.0) * ensemble.correlation_time()
    lo, hi = lo - 0.5 * smear, hi + 0.5 * smear
    W, T = config.coincidence_window, config.arm_imbalance
    return (_overlap_fraction(lo, hi, 0.0, W),
            _overlap_fraction(lo, hi, T, W),
            _overlap_fraction(lo, hi, -T, W))


def _rate_curve(ensemble: BiphotonEnsemble, config: FransonConfig, w):
    f0, f_plus, f_minus = _path_windows(ensemble, config)
    fiber = (spectral_phase(ensemble.omega_a, config.profile_a)
             + spectral_phase(ensemble.omega_b, config.profile_b))
    a_ss = 0.25 * np.exp(1j * fiber)
    pump = ensemble.pump_frequency * config.arm_imbalance
    leak = math.fsum(w * (f_plus + f_minus)) / 16.0

    def rates(phase_sum):
        # exactly rounded sums: independent of the order of the detuning grid
        a_ll = a_ss[None, :] * np.exp(1j * (np.asarray(phase_sum)[:, None] + pump))
        terms = np.abs(a_ss[None, :] + a_ll) ** 2 * (f0 * w)
        return np.array([math.fsum(row) for row in terms]) + leak

    return rates


def coincidence_rate(ensemble: BiphotonEnsemble, config: FransonConfig,
                     check_convergence: bool = True) -> CoincidenceResult:
    """Windowed coincidence probability and its fringe versus ``phi_A + phi_B``.

    Rates are probabilities per pair for one output port at each analyzer
    (at most 1/4).  With ``check_convergence`` the computation is repeated
    on a twice finer grid and a :class:`ConvergenceWarning` is issued if
    the visibility moves by more than 1e-3.
    """
    w, _, warns = _band_weights(ensemble, config)
    result = _finish(_rate_curve(ensemble, config, w), config, warns)
    if check_convergence:
        ref = ensemble.refined()
        fine = _finish(_rate_curve(ref, config, _band_weights(ref, config)[0]),
                       config, [])
        if abs(fine.visibility - result.visibility) > 1e-3:
            msg = (f"visibility changed by {abs(fine.visibility - result.visibility):.2e} "
                   "on grid refinement")
            warnings.warn(msg, ConvergenceWarning, stacklevel=2)
            result = replace(result, warnings=result.warnings + (msg,))
    return result


def coincidence_oracle(ensemble: BiphotonEnsemble, config: FransonConfig,
                       oversample: float = 1.25) -> CoincidenceResult:
    """Time-domain brute-force counterpart of :func:`coincidence_rate`.

    The joint spectral amplitude (square root of the ensemble density, with
    the fiber phases) is Fourier transformed to the relative arrival time
    ``t = t_A - t_B``; the four paths are coherent shifted copies of it and
    ``|sum|^2`` is integrated over the boxcar window on the time grid.
    """
    _, mask, warns = _band_weights(ensemble, config)
    keep = mask if config.out_of_band == "exclude" else np.ones_like(mask)
    delays = relative_delay(ensemble, config)[keep]
    reach = float(np.abs(delays).max()) + config.arm_imbalance + config.coincidence_window
    period = 2 * oversample * max(reach, 10 * ensemble.correlation_time())
    lo, hi = ensemble.detuning[0], ensemble.detuning[-1]
    n = int(math.ceil((hi - lo) * period / (2 * math.pi))) + 1
    m = 1 << int(math.ceil(math.log2(max(n, 16))))
    det = lo + np.arange(m) * (2 * math.pi / period)
    inside = det <= hi * (1 + 1e-12)
    amp = np.where(inside, np.sqrt(ensemble.density(np.where(inside, det, 0.0))), 0.0)
    full_norm = amp.copy()
    if config.out_of_band == "exclude":
        inside &= _band_mask(det, ensemble, config)
        amp = np.where(inside, amp, 0.0)
    wa = 0.5 * ensemble.pump_frequency + det
    wb = 0.5 * ensemble.pump_frequency - det
    phase = np.zeros(m)
    phase[inside] = (spectral_phase(wa[inside], config.profile_a)
                     + spectral_phase(wb[inside], config.profile_b))
    psi = amp * np.exp(1j * phase)
    dt = period / m
    t = (np.arange(m) - m // 2) * dt
    T = config.arm_imbalance

    def to_time(spec):
        # f(t) = sum_n spec_n exp(-i det_n t) on t centered at 0
        g = np.fft.fft(spec * np.exp(1j * det * (m // 2) * dt))
        return np.exp(-1j * lo * t) * g

    norm = float(np.sum(full_norm ** 2)) * m   # Parseval, unfiltered spectrum
    f_ss = to_time(psi)
    f_ss = f_ss / math.sqrt(norm)
    f_sl = to_time(psi * np.exp(-1j * det * T)) / math.sqrt(norm)   # peak at t = -T
    f_ls = to_time(psi * np.exp(1j * det * T)) / math.sqrt(norm)    # peak at t = +T
    half = 0.5 * config.coincidence_window
    win = np.clip((half - np.abs(t)) / dt + 0.5, 0.0, 1.0)
    sel = win > 0
    f_ss, f_sl, f_ls, win = f_ss[sel], f_sl[sel], f_ls[sel], win[sel]
    pump = ensemble.pump_frequency * T

    def rates(phase_sum):
        phase_sum = np.asarray(phase_sum)[:, None]
        phi_b = config.phase_b
        phi_a = phase_sum - phi_b
        total = (f_ss * (1 + np.exp(1j * (phase_sum + pump)))
                 + np.exp(1j * (phi_b + 0.5 * pump)) * f_sl
                 + np.exp(1j * (phi_a + 0.5 * pump)) * f_ls)
        return (np.abs(total) ** 2 @ win) / 16.0

    return _finish(rates, config, warns)


def write_sweep_csv(path, rows) -> None:
    """Rows of (detuning_nm, length_km, visibility, S_value, violated)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        for det, length, vis, s, viol in rows:
            writer.writerow([f"{det:.6g}", f"{length:.6g}", f"{vis:.12f}", f"{s:.12f}",
                             str(bool(viol)).lower()])
