import functools
from pathlib import Path

import numpy as np
import pytest

from gwi.qstate import SIGMA_X, SIGMA_Y, SIGMA_Z, MixedState, PureState

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "data"


def dense_operator(bloch_or_none):
    """Dense 2x2 operator built straight from Pauli matrices."""
    if bloch_or_none is None:
        return np.eye(2, dtype=complex)
    x, y, z = bloch_or_none
    return x * SIGMA_X + y * SIGMA_Y + z * SIGMA_Z


def dense_expectation(state, blochs):
    """Oracle: Tr[rho (O_1 x ... x O_n)] with explicit Kronecker products."""
    op = functools.reduce(np.kron, [dense_operator(b) for b in blochs])
    if isinstance(state, PureState):
        psi = state.amplitudes
        return float(np.real(psi.conj() @ op @ psi))
    return float(np.real(np.trace(state.matrix @ op)))


def random_pure(rng, n):
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return PureState.from_unnormalized(v)


def random_mixed(rng, n, rank=None):
    dim = 1 << n
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    rho /= np.trace(rho).real
    return MixedState((rho + rho.conj().T) / 2)


def random_unit(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        ok, detail = mod.RESULTS[k]
        terminalreporter.write_line(mod._line(k, ok, detail))
