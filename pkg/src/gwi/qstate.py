"""N-qubit states, dichotomic qubit observables and their quantum statistics.

Basis convention: party 1 is the most significant bit of the computational
basis index, and ``|0>``/``|1>`` are the ``sigma_z`` eigenstates with
eigenvalues +1/-1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ArityError, DomainError, ValidationError

STRUCT_TOL = 1e-12
NUM_TOL = 1e-10
PSD_TOL = 1e-10
MAX_DENSE_PARTIES = 10

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


def _parties_from_dim(dim: int) -> int:
    n = dim.bit_length() - 1
    if n < 1 or 1 << n != dim:
        raise ValidationError(f"dimension {dim} is not 2**n for n >= 1")
    if n > MAX_DENSE_PARTIES:
        raise ValidationError(f"at most {MAX_DENSE_PARTIES} qubits are supported, got {n}")
    return n


@dataclass(frozen=True, eq=False)
class PureState:
    """Normalized state vector of ``n_parties`` qubits."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.ndim != 1:
            raise ValidationError("amplitudes must be a 1-d vector")
        _parties_from_dim(amps.size)
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > STRUCT_TOL:
            raise ValidationError(f"state is not normalized (|psi|^2 = {norm!r})")
        object.__setattr__(self, "amplitudes", _frozen(amps))

    @classmethod
    def from_unnormalized(cls, amplitudes) -> "PureState":
        amps = np.asarray(amplitudes, dtype=complex)
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise ValidationError("zero vector cannot be normalized")
        return cls(amps / norm)

    @property
    def n_parties(self) -> int:
        return _parties_from_dim(self.amplitudes.size)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def density_matrix(self) -> "MixedState":
        return MixedState._trusted(np.outer(self.amplitudes, self.amplitudes.conj()))

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.n_parties)


@dataclass(frozen=True, eq=False)
class MixedState:
    """Density matrix of ``n_parties`` qubits.

    Positivity is checked only here, on construction from user input;
    states produced internally go through ``_trusted``.
    """

    matrix: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.matrix, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValidationError("density matrix must be square")
        _parties_from_dim(rho.shape[0])
        if not np.allclose(rho, rho.conj().T, atol=STRUCT_TOL, rtol=0):
            raise ValidationError("density matrix is not Hermitian")
        tr = np.trace(rho).real
        if abs(tr - 1.0) > STRUCT_TOL:
            raise ValidationError(f"density matrix trace is {tr!r}, expected 1")
        if np.linalg.eigvalsh(rho).min() < -PSD_TOL:
            raise ValidationError("density matrix has negative eigenvalues")
        object.__setattr__(self, "matrix", _frozen(rho))

    @classmethod
    def _trusted(cls, matrix: np.ndarray) -> "MixedState":
        obj = object.__new__(cls)
        object.__setattr__(obj, "matrix", _frozen(np.asarray(matrix, dtype=complex)))
        return obj

    @classmethod
    def maximally_mixed(cls, n: int) -> "MixedState":
        dim = 1 << n
        return cls._trusted(np.eye(dim, dtype=complex) / dim)

    @property
    def n_parties(self) -> int:
        return _parties_from_dim(self.matrix.shape[0])

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


State = Union[PureState, MixedState]


@dataclass(frozen=True, eq=False)
class Observable:
    """Dichotomic qubit observable ``n . sigma`` for a unit Bloch vector ``n``."""

    bloch: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.bloch, dtype=float)
        if vec.shape != (3,) or not np.all(np.isfinite(vec)):
            raise DomainError("Bloch vector must be a finite real 3-vector")
        norm = float(np.linalg.norm(vec))
        if abs(norm - 1.0) > STRUCT_TOL:
            raise DomainError(f"Bloch vector must have unit norm, got {norm!r}")
        object.__setattr__(self, "bloch", _frozen(vec))

    @classmethod
    def from_direction(cls, vec) -> "Observable":
        vec = np.asarray(vec, dtype=float)
        return cls(vec / np.linalg.norm(vec))

    @property
    def matrix(self) -> np.ndarray:
        x, y, z = self.bloch
        return x * SIGMA_X + y * SIGMA_Y + z * SIGMA_Z

    def projector(self, outcome: int) -> np.ndarray:
        """Spectral projector ``(I + outcome * n.sigma) / 2``."""
        return (IDENTITY_2 + outcome * self.matrix) / 2

    def __repr__(self):
        x, y, z = self.bloch
        return f"Observable(bloch=({x:.6g}, {y:.6g}, {z:.6g}))"

    def __eq__(self, other):
        if not isinstance(other, Observable):
            return NotImplemented
        return bool(np.array_equal(self.bloch, other.bloch))

    def __hash__(self):
        return hash(self.bloch.tobytes())


PAULI_X = Observable(np.array([1.0, 0.0, 0.0]))
PAULI_Y = Observable(np.array([0.0, 1.0, 0.0]))
PAULI_Z = Observable(np.array([0.0, 0.0, 1.0]))


# -- constructors -----------------------------------------------------------

def basis_state(bits: str) -> PureState:
    """Computational basis state from a bit string such as ``"0101"``."""
    if not bits or set(bits) - {"0", "1"}:
        raise ValidationError(f"invalid bit string {bits!r}")
    amps = np.zeros(1 << len(bits), dtype=complex)
    amps[int(bits, 2)] = 1.0
    return PureState(amps)


def make_ghz(n: int) -> PureState:
    if n < 2:
        raise ArityError(f"GHZ state needs n >= 2 parties, got {n}")
    amps = np.zeros(1 << n, dtype=complex)
    amps[0] = amps[-1] = 1 / np.sqrt(2)
    return PureState(amps)


def make_cluster4() -> PureState:
    amps = np.zeros(16, dtype=complex)
    amps[0b0000] = amps[0b0011] = amps[0b1100] = 0.5
    amps[0b1111] = -0.5
    return PureState(amps)


def make_w(n: int) -> PureState:
    if n < 2:
        raise ArityError(f"W state needs n >= 2 parties, got {n}")
    amps = np.zeros(1 << n, dtype=complex)
    amps[[1 << k for k in range(n)]] = 1 / np.sqrt(n)
    return PureState(amps)


def make_singlet() -> PureState:
    amps = np.zeros(4, dtype=complex)
    amps[0b01] = 1 / np.sqrt(2)
    amps[0b10] = -1 / np.sqrt(2)
    return PureState(amps)


def add_white_noise(psi: State, v: float) -> MixedState:
    """``v |psi><psi| + (1 - v) I / 2**n``."""
    if not 0.0 <= v <= 1.0:
        raise DomainError(f"visibility must lie in [0, 1], got {v!r}")
    rho = psi.density_matrix().matrix if isinstance(psi, PureState) else psi.matrix
    dim = rho.shape[0]
    return MixedState._trusted(v * rho + (1 - v) * np.eye(dim) / dim)


# -- statistics -------------------------------------------------------------

def _apply_local(tensor: np.ndarray, op: np.ndarray, axis: int) -> np.ndarray:
    out = np.tensordot(op, tensor, axes=([1], [axis]))
    return np.moveaxis(out, 0, axis)


def local_expectation(state: State, ops: Sequence[Optional[np.ndarray]]) -> complex:
    """``Tr[rho (O_1 x ... x O_n)]`` for 2x2 local operators (``None`` = identity)."""
    n = state.n_parties
    if len(ops) != n:
        raise ArityError(f"expected {n} local operators, got {len(ops)}")
    if isinstance(state, PureState):
        psi = state.tensor()
        phi = psi
        for axis, op in enumerate(ops):
            if op is not None:
                phi = _apply_local(phi, op, axis)
        return complex(np.vdot(psi, phi))
    rho = state.matrix.reshape((2,) * (2 * n))
    for axis, op in enumerate(ops):
        if op is not None:
            rho = _apply_local(rho, op, axis)
    return complex(np.trace(rho.reshape(1 << n, 1 << n)))


def expectation(state: State, selectors: Sequence[Optional[Observable]]) -> float:
    """Correlator of the selected observables; ``None`` marks an identity slot."""
    if len(selectors) != state.n_parties:
        raise ArityError(f"expected {state.n_parties} selectors, got {len(selectors)}")
    for sel in selectors:
        if sel is not None and not isinstance(sel, Observable):
            raise DomainError(f"selector {sel!r} is neither an Observable nor None")
    value = local_expectation(state, [None if s is None else s.matrix for s in selectors])
    return float(value.real)


def joint_probability(state: State, settings: Sequence[Observable], outcomes: Sequence[int]) -> float:
    """Probability that each party ``i`` measuring ``settings[i]`` obtains ``outcomes[i]``."""
    n = state.n_parties
    if len(settings) != n or len(outcomes) != n:
        raise ArityError(f"expected {n} settings and outcomes, got {len(settings)} and {len(outcomes)}")
    for o in outcomes:
        if o not in (1, -1):
            raise DomainError(f"outcomes must be +1 or -1, got {o!r}")
    value = local_expectation(state, [obs.projector(o) for obs, o in zip(settings, outcomes)])
    return float(value.real)
