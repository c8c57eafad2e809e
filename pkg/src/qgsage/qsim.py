"""Minimal statevector simulator for the quantum aggregator circuits.

Conventions used throughout the package:

* Qubit 0 is the leftmost (most significant) bit of a basis index, so a
  basis state |b0 b1 ... b_{n-1}> has index sum(b_q * 2**(n-1-q)).
* Rotations follow R_P(theta) = exp(-i * theta * P / 2), e.g.
  RY(pi)|0> = |1> up to global phase (here exactly |1> since RY is real).
* Gate angles are never stored on the gate itself: a GateOp carries a
  parameter-vector index plus a multiplicative scale, and the angle is
  resolved at application time as params[param_index] * scale.

The DensityMatrix type exists as a test oracle for the pooling semantics
(partial trace / deferred measurement). The runtime evaluation path is
pure-state only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

ROTATION_KINDS = ("RX", "RY", "RZ")
TWO_QUBIT_KINDS = ("CZ", "CX")
GATE_KINDS = ROTATION_KINDS + TWO_QUBIT_KINDS

_NORM_TOL = 1e-10


@dataclass
class StateVector:
    """Complex amplitudes over n qubits, kept normalized to 1."""

    n_qubits: int
    amplitudes: np.ndarray

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        """The all-zeros computational basis state |00...0>."""
        if n_qubits < 1:
            raise ValueError(f"need at least one qubit, got {n_qubits}")
        amps = np.zeros(2**n_qubits, dtype=np.complex128)
        amps[0] = 1.0
        return cls(n_qubits, amps)

    @classmethod
    def from_amplitudes(cls, amps: Sequence[complex]) -> "StateVector":
        arr = np.asarray(amps, dtype=np.complex128)
        n = int(np.log2(arr.size))
        if 2**n != arr.size:
            raise ValueError(f"amplitude length {arr.size} is not a power of two")
        state = cls(n, arr.copy())
        state.check_norm()
        return state

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    def check_norm(self) -> None:
        n = self.norm()
        if abs(n - 1.0) > _NORM_TOL:
            raise ValueError(f"state norm {n!r} deviates from 1 beyond {_NORM_TOL}")

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amplitudes.copy())


@dataclass(frozen=True)
class GateOp:
    """One gate in a circuit description.

    kind: one of RX, RY, RZ, CZ, CX.
    qubits: target qubits; rotations take exactly one, CZ/CX exactly two
        distinct qubits (control first for CX; CZ is symmetric).
    param_index: position in the parameter vector supplying the angle.
        Required for rotations, disallowed for CZ/CX.
    scale: multiplier applied to the looked-up parameter. This is how
        input-dependent angles (frequency * feature) are expressed
        without baking numbers into the circuit description.
    """

    kind: str
    qubits: tuple[int, ...]
    param_index: int | None = None
    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if self.kind in ROTATION_KINDS:
            if len(self.qubits) != 1:
                raise ValueError(f"{self.kind} takes one qubit, got {self.qubits}")
            if self.param_index is None:
                raise ValueError(f"{self.kind} on {self.qubits} needs a param_index")
        else:
            if len(self.qubits) != 2 or self.qubits[0] == self.qubits[1]:
                raise ValueError(f"{self.kind} takes two distinct qubits, got {self.qubits}")
            if self.param_index is not None:
                raise ValueError(f"{self.kind} does not take parameters")


def rotation_matrix(kind: str, angle: float) -> np.ndarray:
    """2x2 unitary for R_kind(angle) = exp(-i * angle * Pauli / 2)."""
    half = 0.5 * angle
    c, s = np.cos(half), np.sin(half)
    if kind == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)
    if kind == "RY":
        return np.array([[c, -s], [s, c]], dtype=np.complex128)
    if kind == "RZ":
        return np.array([[c - 1j * s, 0.0], [0.0, c + 1j * s]], dtype=np.complex128)
    raise ValueError(f"not a rotation kind: {kind!r}")


def _resolve_angle(gate: GateOp, params: Sequence[float]) -> float:
    idx = gate.param_index
    assert idx is not None
    if idx < 0 or idx >= len(params):
        raise IndexError(f"param_index {idx} out of range for {len(params)} params")
    return float(params[idx]) * gate.scale


def _check_qubits(gate: GateOp, n_qubits: int) -> None:
    for q in gate.qubits:
        if q < 0 or q >= n_qubits:
            raise ValueError(f"qubit {q} out of range for {n_qubits}-qubit state")


def apply_gate(state: StateVector, gate: GateOp, params: Sequence[float]) -> StateVector:
    """Apply one gate and return the transformed state.

    The input state is not modified. Amplitudes are reshaped to one axis
    per qubit; with the most-significant-bit convention, axis q is
    exactly qubit q.
    """
    _check_qubits(gate, state.n_qubits)
    n = state.n_qubits
    tensor = state.amplitudes.reshape((2,) * n)

    if gate.kind in ROTATION_KINDS:
        u = rotation_matrix(gate.kind, _resolve_angle(gate, params))
        (q,) = gate.qubits
        out = np.tensordot(u, tensor, axes=([1], [q]))
        out = np.moveaxis(out, 0, q)
    elif gate.kind == "CZ":
        a, b = gate.qubits
        out = tensor.copy()
        sl = [slice(None)] * n
        sl[a] = 1
        sl[b] = 1
        out[tuple(sl)] *= -1.0
    else:  # CX
        a, b = gate.qubits
        out = tensor.copy()
        ctl = [slice(None)] * n
        ctl[a] = 1
        hit0, hit1 = list(ctl), list(ctl)
        hit0[b] = 0
        hit1[b] = 1
        out[tuple(hit0)], out[tuple(hit1)] = (
            tensor[tuple(hit1)].copy(),
            tensor[tuple(hit0)].copy(),
        )

    return StateVector(n, np.ascontiguousarray(out).reshape(-1))


def apply_circuit(
    state: StateVector, gates: Sequence[GateOp], params: Sequence[float]
) -> StateVector:
    for gate in gates:
        state = apply_gate(state, gate, params)
    return state


def gate_unitary(gate: GateOp, n_qubits: int, params: Sequence[float]) -> np.ndarray:
    """Full 2^n x 2^n unitary embedding of a gate. Test/reference use only."""
    _check_qubits(gate, n_qubits)
    dim = 2**n_qubits
    if gate.kind in ROTATION_KINDS:
        small = rotation_matrix(gate.kind, _resolve_angle(gate, params))
        (q,) = gate.qubits
        u = np.eye(1, dtype=np.complex128)
        for pos in range(n_qubits):
            u = np.kron(u, small if pos == q else np.eye(2))
        return u
    # Build the two-qubit gate entrywise from the control/target bit values.
    a, b = gate.qubits
    u = np.zeros((dim, dim), dtype=np.complex128)
    for idx in range(dim):
        bit_a = (idx >> (n_qubits - 1 - a)) & 1
        bit_b = (idx >> (n_qubits - 1 - b)) & 1
        if gate.kind == "CZ":
            u[idx, idx] = -1.0 if bit_a and bit_b else 1.0
        else:  # CX
            src = idx ^ (1 << (n_qubits - 1 - b)) if bit_a else idx
            u[idx, src] = 1.0
    return u


def expectation_weighted_z(
    state: StateVector, qubits: Sequence[int], weights: Sequence[float]
) -> float:
    """Weighted mean of single-qubit Z expectations: sum_i w_i <Z_i> / len."""
    qubits = list(qubits)
    weights = list(weights)
    if len(qubits) != len(weights):
        raise ValueError(f"{len(qubits)} qubits vs {len(weights)} weights")
    if not qubits:
        raise ValueError("need at least one measured qubit")
    if len(set(qubits)) != len(qubits):
        raise ValueError(f"duplicate qubits in {qubits}")
    n = state.n_qubits
    probs = np.abs(state.amplitudes) ** 2
    total = 0.0
    for q, w in zip(qubits, weights):
        if q < 0 or q >= n:
            raise ValueError(f"qubit {q} out of range for {n}-qubit state")
        bits = (np.arange(2**n) >> (n - 1 - q)) & 1
        signs = 1.0 - 2.0 * bits
        total += w * float(probs @ signs)
    return total / len(qubits)


@dataclass
class DensityMatrix:
    """Mixed-state oracle used to cross-check pure-state pooling.

    Not part of the evaluation path: circuits are simulated on pure
    states only, and pooling relies on measurement deferral. Tests use
    this type to verify that deferral is actually sound.
    """

    n_qubits: int
    entries: np.ndarray = field(repr=False)

    @classmethod
    def from_state(cls, state: StateVector) -> "DensityMatrix":
        amps = state.amplitudes
        return cls(state.n_qubits, np.outer(amps, amps.conj()))

    def validate(self, tol: float = 1e-9) -> None:
        rho = self.entries
        if not np.allclose(rho, rho.conj().T, atol=tol):
            raise ValueError("density matrix is not Hermitian")
        tr = float(np.real(np.trace(rho)))
        if abs(tr - 1.0) > tol:
            raise ValueError(f"density matrix trace {tr!r} deviates from 1")
        eigs = np.linalg.eigvalsh(rho)
        if eigs.min() < -tol:
            raise ValueError(f"density matrix has negative eigenvalue {eigs.min()!r}")

    def apply_unitary(self, u: np.ndarray) -> "DensityMatrix":
        return DensityMatrix(self.n_qubits, u @ self.entries @ u.conj().T)

    def apply_gate(self, gate: GateOp, params: Sequence[float]) -> "DensityMatrix":
        return self.apply_unitary(gate_unitary(gate, self.n_qubits, params))

    def partial_trace(self, traced: Sequence[int]) -> "DensityMatrix":
        kept = _kept_after_trace(self.n_qubits, traced)
        n, k = self.n_qubits, len(kept)
        traced_sorted = [q for q in range(n) if q not in kept]
        rho = self.entries.reshape((2,) * (2 * n))
        # Move kept axes to the front on both the row and column side,
        # then contract the traced axes pairwise.
        row_order = kept + traced_sorted
        perm = row_order + [n + ax for ax in row_order]
        rho = rho.transpose(perm)
        rho = rho.reshape(2**k, 2 ** (n - k), 2**k, 2 ** (n - k))
        out = np.einsum("aibi->ab", rho)
        return DensityMatrix(k, out)

    def expectation(self, observable: np.ndarray) -> float:
        val = np.trace(observable @ self.entries)
        return float(np.real(val))


def _kept_after_trace(n_qubits: int, traced: Sequence[int]) -> list[int]:
    traced = list(traced)
    if len(set(traced)) != len(traced):
        raise ValueError(f"duplicate qubits in trace list {traced}")
    for q in traced:
        if q < 0 or q >= n_qubits:
            raise ValueError(f"qubit {q} out of range for {n_qubits}-qubit state")
    kept = [q for q in range(n_qubits) if q not in traced]
    if not kept:
        raise ValueError("cannot trace out every qubit")
    return kept


def partial_trace(state: StateVector, traced: Sequence[int]) -> DensityMatrix:
    """Reduced density matrix of a pure state over the kept qubits.

    Kept qubits stay in ascending order, relabeled from 0.
    """
    kept = _kept_after_trace(state.n_qubits, traced)
    n, k = state.n_qubits, len(kept)
    traced_sorted = [q for q in range(n) if q not in kept]
    tensor = state.amplitudes.reshape((2,) * n)
    tensor = tensor.transpose(kept + traced_sorted)
    mat = tensor.reshape(2**k, 2 ** (n - k))
    return DensityMatrix(k, mat @ mat.conj().T)


def weighted_z_observable(n_qubits: int, weights: Sequence[float]) -> np.ndarray:
    """Dense matrix of the weighted mean-Z observable. Test/reference use only."""
    weights = list(weights)
    if len(weights) != n_qubits:
        raise ValueError(f"{len(weights)} weights for {n_qubits} qubits")
    dim = 2**n_qubits
    diag = np.zeros(dim)
    for q, w in enumerate(weights):
        bits = (np.arange(dim) >> (n_qubits - 1 - q)) & 1
        diag += w * (1.0 - 2.0 * bits)
    return np.diag(diag / n_qubits).astype(np.complex128)
