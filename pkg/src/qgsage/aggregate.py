"""Neighborhood aggregation over molecule graphs.

Nodes are visited in ascending index order. For node v, every neighbor
u contributes an input vector of u's seven scaled features plus the
previous node's output encoded into [0, pi]; the node's raw output is
the arithmetic mean of the per-neighbor aggregator outputs, optionally
squashed by tanh, and the molecule prediction is the mean over nodes.

The previous-output channel makes each node's output depend on every
earlier parameter use, so the gradient path runs in forward mode: it
carries d(prev)/d(params) alongside prev and chains it through each
neighbor's input derivative. Parameter-shift gives exact per-call
derivatives, and this recurrence is the only composition on top.

Aggregating by mean is exactly the product-register semantics: running
the circuit once per neighbor and averaging equals preparing all
neighbor registers jointly and reading the mean-Z observable over the
union of their kept qubits (tests check this against the simulator).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import classical as cl
from .circuit import ParamVector, QGCNCircuit
from .graphdata import N_FEATURES, PreparedMolecule

ENC_SLOPE = np.pi / 2

SIGMAS = ("identity", "tanh")


def encode_prev(prev: float) -> float:
    """Affine map from the output range [-1, 1] into the angle range [0, pi]."""
    return (float(prev) + 1.0) * ENC_SLOPE


def node_input(mol: PreparedMolecule, v: int, prev: float) -> np.ndarray:
    """One input row per neighbor: scaled features plus the encoded
    previous-node output in the last slot."""
    nbrs = mol.neighbors[v]
    rows = np.empty((len(nbrs), N_FEATURES + 1))
    rows[:, :N_FEATURES] = mol.features[nbrs]
    rows[:, N_FEATURES] = encode_prev(prev)
    return rows


def _sigma(kind: str, raw: float) -> tuple[float, float]:
    if kind == "identity":
        return raw, 1.0
    out = float(np.tanh(raw))
    return out, 1.0 - out * out


class AggregatorModel:
    """Common surface of the quantum and classical node aggregators."""

    sigma: str = "identity"

    @property
    def total_params(self) -> int:
        raise NotImplementedError

    def hop_index(self, v: int) -> int:
        raise NotImplementedError

    def param_slice(self, hop: int) -> slice:
        raise NotImplementedError

    def run(self, hop: int, vec: np.ndarray) -> float:
        raise NotImplementedError

    def run_with_grad(self, hop: int, vec: np.ndarray):
        raise NotImplementedError

    def get_params(self) -> np.ndarray:
        raise NotImplementedError

    def set_params(self, values: np.ndarray) -> None:
        raise NotImplementedError


@dataclass
class QuantumAggregator(AggregatorModel):
    """Circuit-backed aggregator; several circuits means hop-indexed
    (multi) mode where node v uses circuit min(v, len - 1)."""

    circuits: list[QGCNCircuit]
    params: list[ParamVector]
    sigma: str = "identity"
    backend: str | None = None
    _offsets: list[int] = field(default_factory=list, repr=False)

    def __post_init__(self) -> None:
        if not self.circuits:
            raise ValueError("need at least one circuit")
        if len(self.circuits) != len(self.params):
            raise ValueError(
                f"{len(self.circuits)} circuits with {len(self.params)} parameter sets"
            )
        for circ in self.circuits:
            if circ.n_qubits != N_FEATURES + 1:
                raise ValueError(
                    f"aggregator inputs have {N_FEATURES + 1} components but the "
                    f"circuit has {circ.n_qubits} qubits"
                )
        if self.sigma not in SIGMAS:
            raise ValueError(f"sigma must be one of {SIGMAS}, got {self.sigma!r}")
        self._offsets = [0]
        for circ in self.circuits:
            self._offsets.append(self._offsets[-1] + circ.param_count)

    @property
    def multi(self) -> bool:
        return len(self.circuits) > 1

    @property
    def total_params(self) -> int:
        return self._offsets[-1]

    def hop_index(self, v: int) -> int:
        return min(v, len(self.circuits) - 1)

    def hop_circuit(self, v: int) -> tuple[QGCNCircuit, ParamVector]:
        hop = self.hop_index(v)
        return self.circuits[hop], self.params[hop]

    def param_slice(self, hop: int) -> slice:
        return slice(self._offsets[hop], self._offsets[hop + 1])

    def run(self, hop: int, vec: np.ndarray) -> float:
        from .circuit import run_aggregator

        return run_aggregator(self.circuits[hop], vec, self.params[hop], self.backend)

    def run_with_grad(self, hop: int, vec: np.ndarray):
        from .grad import value_and_grad

        return value_and_grad(self.circuits[hop], vec, self.params[hop], self.backend)

    def get_params(self) -> np.ndarray:
        return np.concatenate([pv.values for pv in self.params])

    def set_params(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (self.total_params,):
            raise ValueError(f"got {values.shape}, expected ({self.total_params},)")
        for k, pv in enumerate(self.params):
            pv.values[:] = values[self._offsets[k] : self._offsets[k + 1]]


@dataclass
class ClassicalAggregator(AggregatorModel):
    """Drop-in dense-network aggregator over the same input rows."""

    mlp: cl.MLP
    sigma: str = "identity"

    def __post_init__(self) -> None:
        if self.mlp.sizes[0] != N_FEATURES + 1:
            raise ValueError(
                f"aggregator inputs have {N_FEATURES + 1} components but the "
                f"network takes {self.mlp.sizes[0]}"
            )
        if self.sigma not in SIGMAS:
            raise ValueError(f"sigma must be one of {SIGMAS}, got {self.sigma!r}")

    @property
    def total_params(self) -> int:
        return cl.param_count(self.mlp)

    def hop_index(self, v: int) -> int:
        return 0

    def param_slice(self, hop: int) -> slice:
        return slice(0, self.total_params)

    def run(self, hop: int, vec: np.ndarray) -> float:
        return cl.mlp_forward(self.mlp, vec)

    def run_with_grad(self, hop: int, vec: np.ndarray):
        value = cl.mlp_forward(self.mlp, vec)
        gw, gb, dx = cl.mlp_backward(self.mlp, vec)
        return value, cl.flat_grads(gw, gb), dx

    def get_params(self) -> np.ndarray:
        return cl.flat_params(self.mlp)

    def set_params(self, values: np.ndarray) -> None:
        cl.set_flat_params(self.mlp, values)


def aggregate_neighbors(model: AggregatorModel, hop: int, vectors: np.ndarray) -> float:
    """Arithmetic mean of per-neighbor aggregator outputs."""
    if len(vectors) == 0:
        raise ValueError("a node must aggregate at least one neighbor")
    return float(np.mean([model.run(hop, vec) for vec in vectors]))


def forward_molecule(
    model: AggregatorModel, mol: PreparedMolecule
) -> tuple[float, list[float]]:
    """Molecule prediction plus per-node outputs."""
    prev = 0.0
    outs: list[float] = []
    for v in range(mol.n_atoms):
        hop = model.hop_index(v)
        raw = aggregate_neighbors(model, hop, node_input(mol, v, prev))
        out, _ = _sigma(model.sigma, raw)
        outs.append(out)
        prev = out
    return float(np.mean(outs)), outs


def forward_molecule_with_grad(
    model: AggregatorModel, mol: PreparedMolecule
) -> tuple[float, np.ndarray, list[float]]:
    """Prediction, its parameter gradient, and per-node outputs.

    Forward-mode accumulation: dprev tracks d(prev)/d(params); each
    neighbor's last input component is encode(prev), whose slope is
    ENC_SLOPE, so the neighbor's input derivative folds dprev forward.
    """
    n_params = model.total_params
    prev = 0.0
    dprev = np.zeros(n_params)
    outs: list[float] = []
    douts_sum = np.zeros(n_params)
    for v in range(mol.n_atoms):
        hop = model.hop_index(v)
        block = model.param_slice(hop)
        rows = node_input(mol, v, prev)
        vals = []
        dsum = np.zeros(n_params)
        dprev_coeff = 0.0
        for vec in rows:
            val, dtheta, dx = model.run_with_grad(hop, vec)
            vals.append(val)
            dsum[block] += dtheta
            dprev_coeff += dx[N_FEATURES] * ENC_SLOPE
        k = len(rows)
        raw = float(np.mean(vals))
        draw = dsum / k + (dprev_coeff / k) * dprev
        out, slope = _sigma(model.sigma, raw)
        dout = slope * draw
        outs.append(out)
        douts_sum += dout
        prev, dprev = out, dout
    pred = float(np.mean(outs))
    dpred = douts_sum / mol.n_atoms
    return pred, dpred, outs
