import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "spinor", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("spinor")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_hermitian(rng, n, scale=1.0):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (a + a.conj().T) / 2


def random_unitary(rng, n):
    q, r = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def expm_taylor(a, terms=60):
    """Scaling-and-squaring Taylor series; independent of any eigendecomposition."""
    a = np.asarray(a, dtype=complex)
    norm = max(1.0, float(np.abs(a).sum(axis=1).max()))
    s = int(np.ceil(np.log2(norm))) + 1
    b = a / 2**s
    out = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for k in range(1, terms):
        term = term @ b / k
        out = out + term
    for _ in range(s):
        out = out @ out
    return out
