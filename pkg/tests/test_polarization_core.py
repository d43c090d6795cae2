import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_jones, random_su2, rotation_matrix
from fiberdeco.errors import DomainError
from fiberdeco.polarization_core import (IDENTITY, PRESETS, BirefringenceVector, JonesVector,
                                         apply_propagator, faraday_mirror,
                                         faraday_mirror_poincare, poincare_from_jones,
                                         poincare_rotation, trunk_propagator, unitarity_error)

finite = st.floats(-10, 10, allow_nan=False)
jones = st.tuples(finite, finite, finite, finite).filter(
    lambda t: sum(x * x for x in t) > 1e-6).map(lambda t: np.array([t[0] + 1j * t[1], t[2] + 1j * t[3]]))
unit3 = st.tuples(finite, finite, finite).filter(lambda t: sum(x * x for x in t) > 1e-4).map(
    lambda t: tuple(np.array(t) / np.linalg.norm(t)))


@pytest.mark.parametrize("psi, expected", [
    ((1, 0), (0, 0, 1)),
    ((2 ** -0.5, 2 ** -0.5), (1, 0, 0)),
    ((2 ** -0.5, 1j * 2 ** -0.5), (0, 1, 0)),
    ((0, 1), (0, 0, -1)),
])
def test_poincare_eigenstates(psi, expected):
    np.testing.assert_allclose(poincare_from_jones(psi), expected, atol=1e-15)


def test_presets_map_to_documented_axes():
    axes = {"H": (0, 0, 1), "V": (0, 0, -1), "D": (1, 0, 0), "A": (-1, 0, 0),
            "L": (0, 1, 0), "R": (0, -1, 0)}
    for name, m in axes.items():
        np.testing.assert_allclose(poincare_from_jones(PRESETS[name]), m, atol=1e-15)


def test_null_jones_vector_rejected():
    with pytest.raises(DomainError, match="null Jones vector"):
        poincare_from_jones((0, 0))
    with pytest.raises(DomainError):
        faraday_mirror(np.zeros((3, 2)))


def test_unnormalized_input_gives_unit_vector(rng):
    psi = random_jones(rng, 50) * 7.3
    np.testing.assert_allclose(np.linalg.norm(poincare_from_jones(psi), axis=1), 1.0, atol=1e-14)


def test_jones_vector_type():
    j = JonesVector(3.0, 4j)
    assert j.norm == pytest.approx(5.0)
    assert JonesVector.from_array(np.asarray(j)) == j
    with pytest.raises(DomainError):
        JonesVector.from_array([1, 2, 3])


def test_birefringence_validation():
    with pytest.raises(DomainError):
        BirefringenceVector((1.0, 1.0, 0.0), 1.0)
    with pytest.raises(DomainError):
        BirefringenceVector((1.0, 0.0, 0.0), -1.0)
    b = BirefringenceVector.from_vector([0, 3e-15, 4e-15])
    assert b.magnitude == pytest.approx(5e-15)
    np.testing.assert_allclose(b.vector, [0, 3e-15, 4e-15])
    assert BirefringenceVector.from_vector([0, 0, 0]).magnitude == 0.0


def test_zero_angle_is_identity():
    beta = BirefringenceVector((0.6, 0.0, 0.8), 0.0)
    np.testing.assert_array_equal(trunk_propagator(1e15, 100.0, beta), IDENTITY)


def test_full_turn_is_minus_identity():
    beta = BirefringenceVector((0.0, 1.0, 0.0), 1e-15)
    omega = 2 * math.pi / (100.0 * 1e-15)
    np.testing.assert_allclose(trunk_propagator(omega, 100.0, beta), -IDENTITY, atol=1e-12)


def test_half_turn_about_x_flips_h():
    beta = BirefringenceVector((1.0, 0.0, 0.0), 1.0)
    U = trunk_propagator(math.pi, 1.0, beta)
    out = apply_propagator(U, PRESETS["H"])
    np.testing.assert_allclose(poincare_from_jones(out), (0, 0, -1), atol=1e-15)
    # independent oracle: explicit 3x3 rotation
    np.testing.assert_allclose(rotation_matrix((1, 0, 0), -math.pi) @ (0, 0, 1), (0, 0, -1), atol=1e-15)


def test_negative_length_rejected():
    with pytest.raises(DomainError):
        trunk_propagator(1.0, -1.0, BirefringenceVector((0, 0, 1), 1.0))


def test_apply_propagator_rejects_non_unitary():
    with pytest.raises(DomainError):
        apply_propagator(np.diag([1.0, 1.1]), (1, 0))


def test_apply_identity_and_inverse(rng):
    psi = random_jones(rng)
    np.testing.assert_array_equal(apply_propagator(IDENTITY, psi), psi)
    U = random_su2(rng)
    back = apply_propagator(U.conj().T, apply_propagator(U, psi))
    np.testing.assert_allclose(back, psi, atol=1e-10)


def test_norm_preserved_over_seeded_samples(rng):
    U = random_su2(rng, 200)
    psi = random_jones(rng, 200)
    out = apply_propagator(U, psi)
    np.testing.assert_allclose(np.linalg.norm(out, axis=1), np.linalg.norm(psi, axis=1), rtol=1e-12)


def test_faraday_mirror_examples():
    out = faraday_mirror(np.array([1.0, 0.0]))
    np.testing.assert_allclose(np.abs(out), [0, 1])
    np.testing.assert_allclose(poincare_from_jones(out), (0, 0, -1))
    d = faraday_mirror(PRESETS["D"])
    np.testing.assert_allclose(poincare_from_jones(d), (-1, 0, 0), atol=1e-15)


@given(jones)
def test_faraday_mirror_orthogonal_and_antipodal(psi):
    out = faraday_mirror(psi)
    assert abs(np.vdot(out, psi)) <= 1e-12 * np.vdot(psi, psi).real
    np.testing.assert_allclose(poincare_from_jones(out), -poincare_from_jones(psi), atol=1e-12)
    assert np.linalg.norm(out) == pytest.approx(np.linalg.norm(psi), rel=1e-15)


@given(st.tuples(finite, finite, finite))
def test_poincare_fm_involution(m):
    m = np.array(m)
    np.testing.assert_array_equal(faraday_mirror_poincare(faraday_mirror_poincare(m)), m)


@given(unit3, st.floats(0.0, 4e15), st.floats(0.0, 500.0), jones)
def test_trunk_unitary_and_rotation_oracle(direction, omega, length, psi):
    beta = BirefringenceVector(direction, 1e-15)
    U = trunk_propagator(omega, length, beta)
    assert unitarity_error(U) < 1e-10
    assert abs(abs(np.linalg.det(U)) - 1) < 1e-12
    theta = omega * length * beta.magnitude
    expected = rotation_matrix(direction, -theta) @ poincare_from_jones(psi)
    np.testing.assert_allclose(poincare_from_jones(U @ psi), expected, atol=1e-9)


@given(jones, st.integers(0, 2 ** 32 - 1))
def test_fm_conjugation_invariance(psi, seed):
    U = random_su2(np.random.default_rng(seed))
    out = np.linalg.inv(U) @ faraday_mirror(U @ psi)
    np.testing.assert_allclose(poincare_from_jones(out), -poincare_from_jones(psi), atol=1e-10)


def test_poincare_rotation_matches_action(rng):
    U = random_su2(rng, 20)
    psi = random_jones(rng, 20)
    R = poincare_rotation(U)
    np.testing.assert_allclose(np.einsum("nij,nj->ni", R, poincare_from_jones(psi)),
                               poincare_from_jones(np.einsum("nij,nj->ni", U, psi)), atol=1e-12)
    np.testing.assert_allclose(R @ np.swapaxes(R, 1, 2), np.broadcast_to(np.eye(3), R.shape), atol=1e-12)
