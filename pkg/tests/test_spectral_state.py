import logging
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fiberdeco.errors import DomainError
from fiberdeco.polarization_core import C_LIGHT, PRESETS
from fiberdeco.spectral_state import (CSV_COLUMNS, GAUSSIAN_TBP, SourceSpectrum, SpectralGrid,
                                      SpectralState, degree_of_polarization, make_spectral_state,
                                      mean_polarization, omega_to_wavelength, spectral_rms_time,
                                      trapezoid_weights, wavelength_to_omega)

LED = SourceSpectrum("gaussian", 1550e-9, 66e-9)


def two_component(psi1, psi2):
    omega = np.array([1.2e15, 1.3e15])
    return SpectralState.from_arrays(omega, np.array([psi1, psi2]), np.ones(2))


def test_unit_conversions_round_trip():
    assert wavelength_to_omega(1550e-9) == pytest.approx(2 * math.pi * C_LIGHT / 1550e-9)
    assert omega_to_wavelength(wavelength_to_omega(1310e-9)) == pytest.approx(1310e-9, rel=1e-15)


def test_trapezoid_weights():
    w = trapezoid_weights(np.array([0.0, 1.0, 3.0]))
    np.testing.assert_allclose(w, [0.5, 1.5, 1.0])
    assert trapezoid_weights(np.array([5.0])).tolist() == [1.0]


@pytest.mark.parametrize("kwargs", [dict(shape="lorentzian", center=1e-6, width=1e-9),
                                    dict(shape="gaussian", center=1e-6, width=1e-6),
                                    dict(shape="gaussian", center=-1e-6, width=1e-9)])
def test_non_physical_spectra_rejected(kwargs):
    with pytest.raises(DomainError):
        SourceSpectrum(**kwargs)


def test_grid_and_state_validation():
    with pytest.raises(DomainError):
        SpectralGrid(np.array([2.0, 1.0]), np.ones(2))
    g = SpectralGrid(np.array([1.0, 2.0]), np.array([0.5, 0.5]))
    with pytest.raises(DomainError, match="integrates"):
        SpectralState(g, np.ones((2, 2)), np.array([1.0, 2.0]))
    s = SpectralState(g, np.ones((2, 2)), np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        s.density[0] = 3.0


@pytest.mark.parametrize("shape", ["gaussian", "rectangular"])
@pytest.mark.parametrize("pol", list(PRESETS))
def test_constructed_state_fully_polarized(shape, pol):
    state = make_spectral_state(SourceSpectrum(shape, 1550e-9, 60e-9), PRESETS[pol])
    assert degree_of_polarization(state) == pytest.approx(1.0, abs=1e-9)
    assert np.dot(state.weights, state.density) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(state.poincare(), np.broadcast_to(
        state.poincare()[0], state.poincare().shape), atol=1e-15)
    assert len(state.grid) == 512


def test_single_sample_state():
    state = make_spectral_state(LED, PRESETS["D"], n_samples=1)
    assert len(state.grid) == 1
    assert degree_of_polarization(state) == 1.0
    mono = make_spectral_state(SourceSpectrum("gaussian", 1550e-9, 0.0), PRESETS["H"])
    assert len(mono.grid) == 1


def test_make_state_preconditions():
    with pytest.raises(DomainError):
        make_spectral_state(LED, PRESETS["H"], n_samples=2)
    with pytest.raises(DomainError):
        make_spectral_state(LED, PRESETS["H"], span=0.0)
    with pytest.raises(DomainError, match="null"):
        make_spectral_state(LED, (0, 0))


def test_gaussian_density_matches_shape():
    state = make_spectral_state(LED, PRESETS["H"], n_samples=1001)
    p = state.weights * state.density
    sigma = math.sqrt(p @ (state.omega - LED.omega_center) ** 2)
    assert sigma == pytest.approx(LED.omega_std, rel=1e-6)
    assert spectral_rms_time(state) == pytest.approx(1 / LED.omega_std, rel=1e-6)


def test_coherence_time_for_led():
    # 0.05 ps at 1550 nm with the gaussian time-bandwidth product
    spec = SourceSpectrum.for_coherence_time(1550e-9, 0.05e-12)
    assert spec.coherence_time() == pytest.approx(0.05e-12, rel=1e-12)
    assert spec.width == pytest.approx(66e-9, rel=0.10)
    assert GAUSSIAN_TBP == pytest.approx(0.4413, abs=1e-4)
    assert LED.coherence_time() == pytest.approx(53.6e-15, rel=0.01)


def test_coherence_time_by_fourier_transform():
    # FWHM of |g(tau)|^2, g = Fourier transform of the sampled spectrum
    state = make_spectral_state(LED, PRESETS["H"], n_samples=1024)
    p = state.weights * state.density
    tau = np.linspace(-200e-15, 200e-15, 8001)
    g = np.abs(np.exp(1j * np.outer(tau, state.omega - LED.omega_center)) @ p) ** 2
    above = tau[g >= 0.5 * g.max()]
    assert above[-1] - above[0] == pytest.approx(LED.coherence_time(), rel=2e-3)


def test_mean_polarization_examples():
    h, v, d = (np.asarray(PRESETS[k]) for k in "HVD")
    same = two_component(h, h)
    np.testing.assert_allclose(mean_polarization(same), (0, 0, 1), atol=1e-15)
    anti = two_component(h, v)
    np.testing.assert_allclose(mean_polarization(anti), 0, atol=1e-15)
    assert degree_of_polarization(anti) == 0.0
    mixed = two_component(h, d)
    assert degree_of_polarization(mixed) == pytest.approx(math.sqrt(2) / 2, abs=1e-12)


def test_dop_clamped_and_logged(caplog, monkeypatch):
    import fiberdeco.spectral_state as ss
    state = make_spectral_state(LED, PRESETS["H"], n_samples=5)
    monkeypatch.setattr(ss, "mean_polarization", lambda s: np.array([0.0, 0.0, 1.0 + 2e-9]))
    with caplog.at_level(logging.WARNING):
        assert ss.degree_of_polarization(state) == 1.0
    assert "exceeds 1" in caplog.text


@given(st.integers(0, 2 ** 32 - 1), st.integers(3, 40))
def test_dop_bounds_and_purity(seed, n):
    rng = np.random.default_rng(seed)
    fld = rng.standard_normal((n, 2)) + 1j * rng.standard_normal((n, 2))
    state = SpectralState.from_arrays(np.linspace(1e15, 1.3e15, n), fld, rng.random(n) + 1e-3)
    assert 0.0 <= degree_of_polarization(state) <= 1.0
    np.testing.assert_allclose(np.linalg.norm(state.poincare(), axis=1), 1.0, atol=1e-12)


def test_csv_round_trip(tmp_path):
    state = make_spectral_state(LED, PRESETS["L"], n_samples=33)
    path = tmp_path / "state.csv"
    state.to_csv(path)
    assert path.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)
    back = SpectralState.from_csv(path)
    np.testing.assert_array_equal(back.omega, state.omega)
    np.testing.assert_array_equal(back.field, state.field)
    np.testing.assert_allclose(back.density, state.density, rtol=1e-15)


def test_csv_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(DomainError):
        SpectralState.from_csv(path)
