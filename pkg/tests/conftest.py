import numpy as np
import pytest

from qmemsim.polarization import PAULI_BASIS


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)


def random_ket(rng: np.random.Generator) -> np.ndarray:
    ket = rng.normal(size=2) + 1j * rng.normal(size=2)
    return ket / np.linalg.norm(ket)


def random_density(rng: np.random.Generator) -> np.ndarray:
    # Ginibre construction: always full rank, always physical.
    g = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_cptp_kraus(rng: np.random.Generator, n_kraus: int = 4) -> list[np.ndarray]:
    """Random CPTP qubit channel via a Stinespring isometry."""
    g = rng.normal(size=(2 * n_kraus, 2)) + 1j * rng.normal(size=(2 * n_kraus, 2))
    q, _ = np.linalg.qr(g)
    return [q[2 * i : 2 * i + 2, :] for i in range(n_kraus)]


def apply_kraus(kraus: list[np.ndarray], rho: np.ndarray) -> np.ndarray:
    return sum(k @ rho @ k.conj().T for k in kraus)


def chi_from_kraus(kraus: list[np.ndarray]) -> np.ndarray:
    """Pauli-basis process matrix of a Kraus channel (trace normalized)."""
    coeffs = np.array(
        [[np.trace(s.conj().T @ k) / 2.0 for s in PAULI_BASIS] for k in kraus]
    )
    chi = coeffs.T @ coeffs.conj()
    return chi / np.trace(chi).real
