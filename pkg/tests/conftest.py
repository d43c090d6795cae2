import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))


def random_jones(rng, n=None):
    shape = (2,) if n is None else (n, 2)
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_su2(rng, n=None):
    """Haar-ish SU(2) matrices from random unit quaternions."""
    q = rng.standard_normal((1 if n is None else n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    a0, a1, a2, a3 = q.T
    U = np.empty((q.shape[0], 2, 2), dtype=complex)
    U[:, 0, 0] = a0 + 1j * a3
    U[:, 0, 1] = 1j * a1 + a2
    U[:, 1, 0] = 1j * a1 - a2
    U[:, 1, 1] = a0 - 1j * a3
    return U[0] if n is None else U


def rotation_matrix(axis, angle):
    """Right-handed axis-angle rotation (Rodrigues)."""
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    K = np.array([[0, -n[2], n[1]], [n[2], 0, -n[0]], [-n[1], n[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * K @ K


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
