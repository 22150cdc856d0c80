import numpy as np
import pytest

from puretomo.core import PureState, SystemShape


@pytest.fixture
def ghz3():
    """(|1,1,1> + |2,2,2>)/sqrt(2) on three qubits."""
    amps = np.zeros(8, dtype=complex)
    amps[0] = amps[7] = 1.0 / np.sqrt(2.0)
    return PureState(SystemShape((2, 2, 2)), amps)


def ghz_state(n):
    amps = np.zeros(2 ** n, dtype=complex)
    amps[0] = amps[-1] = 1.0 / np.sqrt(2.0)
    return PureState(SystemShape((2,) * n), amps)


def random_hermitian(rng, n):
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (z + z.conj().T) / 2.0


def random_density(rng, n):
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    m = z @ z.conj().T
    return m / np.trace(m).real
