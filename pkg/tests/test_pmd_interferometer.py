import json
import math

import numpy as np
import pytest

from fiberdeco.errors import DomainError, NumericalError
from fiberdeco.fiber_model import (PS_PER_KM, FiberRandomModel, FiberSpec, FiberTrunk,
                                   generate_fiber)
from fiberdeco.pmd_interferometer import (INTERFEROGRAM_COLUMNS, NO_COUPLING, STRONG_COUPLING,
                                          Interferogram, PmdEstimate, default_scan,
                                          delay_to_displacement, displacement_to_delay,
                                          estimate_pmd, fringe_energy, fringe_envelope,
                                          pmd_coefficient, ps_per_sqrt_km,
                                          spectral_fringe_energy, synthesize_interferogram)
from fiberdeco.polarization_core import PRESETS, BirefringenceVector
from fiberdeco.spectral_state import SourceSpectrum

LED = SourceSpectrum("gaussian", 1550e-9, 66e-9)
PS = 1e-12
KM = 1e3


def pm_fiber(delay=1e-12, direction=(0.0, 0.0, 1.0)):
    return FiberSpec((FiberTrunk(1000.0, BirefringenceVector(direction, delay / 1000.0)),))


def test_displacement_conversion():
    # Fig 2 axis: tau = 2 d / c
    assert displacement_to_delay(1e-6) == pytest.approx(2e-6 / 299_792_458.0)
    assert delay_to_displacement(displacement_to_delay(37e-6)) == pytest.approx(37e-6, rel=1e-15)


def test_pmd_coefficient_examples():
    assert ps_per_sqrt_km(pmd_coefficient(5.96 * PS, 72.9 * KM)) == pytest.approx(0.698, rel=5e-3)
    assert pmd_coefficient(0.0, 5.0 * KM) == 0.0
    assert ps_per_sqrt_km(pmd_coefficient(4 * PS, 16 * KM)) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(DomainError):
        pmd_coefficient(1 * PS, 0.0)
    with pytest.raises(DomainError):
        pmd_coefficient(-1 * PS, 1.0)


def test_interferogram_validation():
    with pytest.raises(DomainError, match="symmetric"):
        Interferogram(np.array([-1.0, 0.0, 2.0]), np.ones(3))
    with pytest.raises(DomainError, match="increasing"):
        Interferogram(np.array([1.0, 0.0, -1.0]), np.ones(3))


def test_default_scan_is_symmetric_and_resolves_fringes():
    f = generate_fiber(FiberRandomModel(100, seed=0))
    scan = default_scan(f, LED)
    np.testing.assert_array_equal(scan, -scan[::-1])
    step = scan[1] - scan[0]
    assert step <= LED.coherence_time() / 8
    assert step * (LED.omega_center + 3 * LED.omega_width) <= math.pi / 2 * (1 + 1e-12)


def test_identity_fiber_single_envelope():
    gram = synthesize_interferogram(FiberSpec(()), LED, PRESETS["H"])
    env = fringe_envelope(gram)
    tau = gram.delays
    assert tau[np.argmax(env)] == pytest.approx(0.0, abs=gram.step)
    rms = math.sqrt(np.sum(tau ** 2 * env) / np.sum(env))
    assert rms == pytest.approx(gram.meta["source_rms"], rel=0.01)
    assert 0.03 * PS < rms < 0.07 * PS
    est = estimate_pmd(gram)
    assert est.delay == 0.0
    assert any("delay set to 0" in w for w in est.warnings)


def test_polarization_maintaining_satellites():
    # polarizer at 45 degrees to the eigenaxes: satellites at +-DGD, half amplitude
    gram = synthesize_interferogram(pm_fiber(1 * PS), LED, PRESETS["D"])
    env = fringe_envelope(gram)
    tau = gram.delays
    centre = env[np.argmin(np.abs(tau))]
    for sign in (1, -1):
        k = np.argmin(np.abs(tau - sign * PS))
        window = slice(k - 20, k + 21)
        assert tau[window][np.argmax(env[window])] == pytest.approx(sign * PS, abs=2 * gram.step)
        assert env[window].max() / centre == pytest.approx(0.5, rel=0.01)


def test_fringes_beyond_coherence_time():
    tau_probe = 2 * PS  # about 40 coherence times
    scan = default_scan(pm_fiber(2 * PS), LED)
    k = np.argmin(np.abs(scan - tau_probe))
    with_pmd = fringe_envelope(synthesize_interferogram(pm_fiber(2 * PS), LED, PRESETS["D"], scan=scan))
    without = fringe_envelope(synthesize_interferogram(FiberSpec(()), LED, PRESETS["D"], scan=scan))
    assert with_pmd[k] > 100 * without[k]


@pytest.fixture(scope="module")
def random_gram():
    f = generate_fiber(FiberRandomModel(300, beta_magnitude=2 * PS_PER_KM, seed=3))
    return synthesize_interferogram(f, LED, PRESETS["D"])


def test_symmetry_and_nonnegativity(random_gram):
    I = random_gram.intensity
    assert np.max(np.abs(I - I[::-1])) <= 1e-9 * np.max(I)
    assert np.all(I >= 0)


def test_parseval(random_gram):
    assert fringe_energy(random_gram) == pytest.approx(spectral_fringe_energy(random_gram), rel=1e-6)


def test_synthesis_methods_agree():
    f = generate_fiber(FiberRandomModel(50, beta_magnitude=2 * PS_PER_KM, seed=9))
    scan = default_scan(f, LED)[::4]
    scan = scan[: scan.size - (scan.size % 2 == 0)]
    scan = 0.5 * (scan - scan[::-1])
    ref = synthesize_interferogram(f, LED, PRESETS["D"], scan=scan, n_samples=801, method="direct")
    czt = synthesize_interferogram(f, LED, PRESETS["D"], scan=scan, n_samples=801, method="czt")
    np.testing.assert_allclose(czt.intensity, ref.intensity, atol=1e-9 * ref.intensity.max())
    fft = synthesize_interferogram(f, LED, PRESETS["D"])
    dd = synthesize_interferogram(f, LED, PRESETS["D"], method="direct")
    np.testing.assert_allclose(fft.intensity, dd.intensity, atol=1e-9 * dd.intensity.max())
    with pytest.raises(DomainError):
        synthesize_interferogram(f, LED, PRESETS["D"], scan=scan, n_samples=801, method="fft")


def test_scan_too_narrow_warns():
    scan = np.arange(-200, 201) * 5e-15
    gram = synthesize_interferogram(pm_fiber(1 * PS), LED, PRESETS["D"], scan=scan)
    assert any("truncate" in w for w in gram.warnings)


def test_single_trunk_estimate():
    f = pm_fiber(1 * PS)
    gram = synthesize_interferogram(f, LED, PRESETS["D"])
    est = estimate_pmd(gram, sigma_to_dgd=NO_COUPLING)
    assert est.delay == pytest.approx(1 * PS, rel=0.05)
    assert ps_per_sqrt_km(est.coefficient) == pytest.approx(1.0, rel=0.05)


def test_low_snr_raises(random_gram):
    noisy = synthesize_interferogram(pm_fiber(1 * PS), LED, PRESETS["D"], noise_rms=5.0, seed=1)
    with pytest.raises(NumericalError):
        estimate_pmd(noisy)


def test_noise_is_seeded():
    a = synthesize_interferogram(pm_fiber(), LED, PRESETS["D"], noise_rms=1e-3, seed=4)
    b = synthesize_interferogram(pm_fiber(), LED, PRESETS["D"], noise_rms=1e-3, seed=4)
    np.testing.assert_array_equal(a.intensity, b.intensity)


def test_estimate_requires_source_rms():
    gram = Interferogram(np.linspace(-1, 1, 11), np.ones(11))
    with pytest.raises(DomainError):
        estimate_pmd(gram)


def test_outputs(tmp_path, random_gram):
    path = tmp_path / "gram.csv"
    random_gram.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(INTERFEROGRAM_COLUMNS)
    assert len(lines) == random_gram.delays.size + 1
    est = estimate_pmd(random_gram)
    rec = json.loads(est.to_json())
    assert set(rec) == {"delay_ps", "coefficient_ps_sqrtkm", "envelope_rms_ps", "method", "warnings"}
    assert rec["method"] == "second-moment"
    assert rec["delay_ps"] == pytest.approx(est.delay / PS)
    assert STRONG_COUPLING == pytest.approx(math.sqrt(0.75))
    assert isinstance(est, PmdEstimate)
