"""Quantum aggregator circuit construction.

A circuit is built from an architecture description in three stages:

* feature map: one RY per qubit whose angle is a trainable frequency
  times the matching input component,
* convolution layers: two-qubit 15-parameter cells laid down in a brick
  pattern, cycled r_l times per layer,
* pooling after each layer: an entangling gate from each even register
  position onto its odd neighbor, after which the even positions are
  dropped from the register (measurement deferral; nothing ever touches
  a dropped qubit again, so tracing it out commutes to the end).

The readout is the weighted mean of single-qubit Z expectations over the
surviving register, weights fixed at one unless the architecture says
otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import qsim
from .qsim import GateOp, StateVector

OP_FM = 0
OP_CELL = 1
OP_CZ = 2
OP_CX = 3

CELL_PARAMS = 15


@dataclass
class ParamVector:
    """Flat trainable parameters plus named (start, stop) segments."""

    values: np.ndarray
    segments: dict[str, tuple[int, int]]

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ValueError(f"parameters must be a flat vector, got shape {self.values.shape}")
        covered = []
        for name, (start, stop) in self.segments.items():
            if not (0 <= start <= stop <= self.values.size):
                raise ValueError(f"segment {name!r}=({start}, {stop}) out of bounds")
            covered.append((start, stop))
        covered.sort()
        cursor = 0
        for start, stop in covered:
            if start != cursor:
                raise ValueError(f"segments must tile the vector, gap/overlap at {start}")
            cursor = stop
        if cursor != self.values.size:
            raise ValueError(f"segments cover {cursor} of {self.values.size} parameters")

    def __len__(self) -> int:
        return self.values.size

    def segment(self, name: str) -> np.ndarray:
        start, stop = self.segments[name]
        return self.values[start:stop]

    def copy(self) -> "ParamVector":
        return ParamVector(self.values.copy(), dict(self.segments))


@dataclass(frozen=True)
class QGCNArchitecture:
    """Shape of one aggregator circuit.

    depths holds the cycle count r_l of each convolution layer; the
    register halves after every layer, so n_qubits must stay even at
    each layer boundary that still has convolutions to run.
    """

    n_qubits: int
    depths: tuple[int, ...]
    correlated: bool = False
    trainable_fm: bool = True
    measure_weights: tuple[float, ...] | None = None
    pooling_gate: str = "CZ"

    def __post_init__(self) -> None:
        object.__setattr__(self, "depths", tuple(int(r) for r in self.depths))
        if self.n_qubits < 2:
            raise ValueError(f"need at least two qubits, got {self.n_qubits}")
        if not self.depths:
            raise ValueError("need at least one convolution layer")
        if any(r < 1 for r in self.depths):
            raise ValueError(f"layer cycle counts must be positive, got {self.depths}")
        if self.pooling_gate not in ("CZ", "CX"):
            raise ValueError(f"pooling gate must be CZ or CX, got {self.pooling_gate!r}")
        sizes = self.register_sizes()
        if self.measure_weights is not None:
            object.__setattr__(
                self, "measure_weights", tuple(float(w) for w in self.measure_weights)
            )
            if len(self.measure_weights) != sizes[-1]:
                raise ValueError(
                    f"{len(self.measure_weights)} measurement weights for a "
                    f"final register of {sizes[-1]}"
                )

    def register_sizes(self) -> list[int]:
        """Register size before each layer plus the final measured size."""
        sizes = [self.n_qubits]
        for layer in range(len(self.depths)):
            cur = sizes[-1]
            if cur < 2:
                raise ValueError(f"register shrank to {cur} before conv layer {layer}")
            if cur % 2:
                raise ValueError(f"register size {cur} at conv layer {layer} is odd")
            sizes.append(cur // 2)
        return sizes


@dataclass(frozen=True)
class ConvCell:
    """One two-qubit convolution cell instance.

    pair: register-relative positions (i, i+1) at this layer.
    qubits: the physical qubits the pair maps to.
    slots: the 15 consecutive parameter positions feeding the cell; in
        correlated mode every cell of a layer carries the same slots.
    """

    layer: int
    pair: tuple[int, int]
    qubits: tuple[int, int]
    slots: tuple[int, ...]


def conv_pairs(n_l: int, j: int) -> list[tuple[int, int]]:
    """Brick pattern for cycle j on a register of n_l: pairs (i, i+1) with
    i = j mod 2, stepping by 2. A two-qubit register has no odd-offset
    bricks, so odd cycles fall back to the single available pair."""
    if n_l < 2:
        raise ValueError(f"register of {n_l} cannot host a convolution")
    if j < 0:
        raise ValueError(f"cycle index must be non-negative, got {j}")
    pairs = [(i, i + 1) for i in range(j % 2, n_l - 1, 2)]
    if not pairs:
        pairs = [(0, 1)]
    return pairs


def _cell_gates(a: int, b: int, slots: Sequence[int]) -> list[GateOp]:
    """Expand one cell into primitive gates, in application order.

    Layout: a general rotation (RX, RZ, RX) on each wire, then three
    entangling blocks (CZ, then RZ/RY, CZ, RY, CZ), then a second
    general rotation on each wire. 15 angles total.
    """
    s = list(slots)
    if len(s) != CELL_PARAMS:
        raise ValueError(f"cell takes {CELL_PARAMS} slots, got {len(s)}")
    return [
        GateOp("RX", (a,), s[0]),
        GateOp("RZ", (a,), s[1]),
        GateOp("RX", (a,), s[2]),
        GateOp("RX", (b,), s[3]),
        GateOp("RZ", (b,), s[4]),
        GateOp("RX", (b,), s[5]),
        GateOp("CZ", (a, b)),
        GateOp("RZ", (a,), s[6]),
        GateOp("RY", (b,), s[7]),
        GateOp("CZ", (a, b)),
        GateOp("RY", (b,), s[8]),
        GateOp("CZ", (a, b)),
        GateOp("RX", (a,), s[9]),
        GateOp("RZ", (a,), s[10]),
        GateOp("RX", (a,), s[11]),
        GateOp("RX", (b,), s[12]),
        GateOp("RZ", (b,), s[13]),
        GateOp("RX", (b,), s[14]),
    ]


def cell_unitary(angles: Sequence[float]) -> np.ndarray:
    """Dense 4x4 unitary of one cell, first qubit as the high bit."""
    ang = [float(t) for t in angles]
    if len(ang) != CELL_PARAMS:
        raise ValueError(f"cell takes {CELL_PARAMS} angles, got {len(ang)}")
    rot = qsim.rotation_matrix
    cz = np.diag([1.0, 1.0, 1.0, -1.0]).astype(np.complex128)
    ua = rot("RX", ang[2]) @ rot("RZ", ang[1]) @ rot("RX", ang[0])
    ub = rot("RX", ang[5]) @ rot("RZ", ang[4]) @ rot("RX", ang[3])
    u = np.kron(ua, ub)
    u = cz @ u
    u = np.kron(rot("RZ", ang[6]), rot("RY", ang[7])) @ u
    u = cz @ u
    u = np.kron(np.eye(2), rot("RY", ang[8])) @ u
    u = cz @ u
    va = rot("RX", ang[11]) @ rot("RZ", ang[10]) @ rot("RX", ang[9])
    vb = rot("RX", ang[14]) @ rot("RZ", ang[13]) @ rot("RX", ang[12])
    return np.kron(va, vb) @ u


def build_feature_map(n_qubits: int, param_base: int = 0) -> list[GateOp]:
    """One RY per qubit; slot param_base + i supplies the frequency and
    the input component arrives later as the gate scale."""
    return [GateOp("RY", (q,), param_base + q) for q in range(n_qubits)]


def build_conv_layer(
    n_l: int,
    r_l: int,
    correlated: bool,
    *,
    qubit_map: Sequence[int] | None = None,
    param_base: int = 0,
    layer: int = 0,
) -> tuple[list[GateOp], list[ConvCell], int]:
    """All cells of one layer: r_l brick cycles over a register of n_l.

    Returns (gates, cells, parameters consumed). Correlated layers
    allocate one shared 15-slot block; otherwise each cell gets its own.
    """
    if qubit_map is None:
        qubit_map = list(range(n_l))
    if len(qubit_map) != n_l:
        raise ValueError(f"qubit map of {len(qubit_map)} for register of {n_l}")
    gates: list[GateOp] = []
    cells: list[ConvCell] = []
    cursor = param_base
    shared = tuple(range(param_base, param_base + CELL_PARAMS))
    for j in range(r_l):
        for i, ip1 in conv_pairs(n_l, j):
            if correlated:
                slots = shared
            else:
                slots = tuple(range(cursor, cursor + CELL_PARAMS))
                cursor += CELL_PARAMS
            cell = ConvCell(layer, (i, ip1), (qubit_map[i], qubit_map[ip1]), slots)
            cells.append(cell)
            gates.extend(_cell_gates(*cell.qubits, cell.slots))
    used = CELL_PARAMS if correlated else CELL_PARAMS * len(cells)
    return gates, cells, used


def build_pooling(
    n_l: int, *, qubit_map: Sequence[int] | None = None, gate: str = "CZ"
) -> tuple[list[GateOp], list[int]]:
    """Entangle each even register position onto its odd neighbor and
    report the odd positions as the surviving register."""
    if n_l < 2 or n_l % 2:
        raise ValueError(f"pooling needs an even register of at least 2, got {n_l}")
    if qubit_map is None:
        qubit_map = list(range(n_l))
    gates = [
        GateOp(gate, (qubit_map[i], qubit_map[i + 1])) for i in range(0, n_l - 1, 2)
    ]
    kept = [i for i in range(n_l) if i % 2 == 1]
    return gates, kept


@dataclass
class CircuitPlan:
    """Array program consumed by the evaluation backends.

    One row per step: OP_FM (qubit a, frequency slot in param, input
    component = a), OP_CELL (pair a/b, param = first of 15 consecutive
    slots), OP_CZ / OP_CX (pair a/b, no params). wz maps each basis
    index to its weighted mean-Z eigenvalue so readout is one dot
    product over probabilities.
    """

    n_qubits: int
    op_kind: np.ndarray
    op_a: np.ndarray
    op_b: np.ndarray
    op_param: np.ndarray
    wz: np.ndarray
    param_count: int
    trainable_fm: bool


@dataclass
class QGCNCircuit:
    """A built aggregator circuit plus its parameter layout."""

    arch: QGCNArchitecture
    gates: tuple[GateOp, ...]
    cells: tuple[ConvCell, ...]
    kept_qubits: tuple[int, ...]
    measure_weights: tuple[float, ...]
    param_count: int
    segments: dict[str, tuple[int, int]]
    layout: tuple[tuple, ...] = field(repr=False)
    _plan: CircuitPlan | None = field(default=None, repr=False, compare=False)

    @property
    def n_qubits(self) -> int:
        return self.arch.n_qubits

    def param_template(self) -> ParamVector:
        return ParamVector(np.zeros(self.param_count), dict(self.segments))

    def bound_gates(
        self, x: Sequence[float], params: "ParamVector | np.ndarray"
    ) -> tuple[list[GateOp], np.ndarray]:
        """Gate list plus full parameter array with the input bound in.

        With trainable frequencies the feature-map angle is frequency
        times input, expressed by setting the gate scale to x_i. With
        fixed frequencies the inputs are appended to the parameter array
        and the feature-map gates index that extension directly.
        """
        x = _check_input(x, self.n_qubits)
        theta = _check_theta(params, self.param_count)
        # Only the feature-map prefix depends on the input; everything
        # after it is rebuilt as-is.
        n = self.n_qubits
        if self.arch.trainable_fm:
            fm = [GateOp("RY", (q,), q, scale=float(x[q])) for q in range(n)]
            return fm + list(self.gates[n:]), theta
        full = np.concatenate([theta, x])
        return list(self.gates), full

    def plan(self) -> CircuitPlan:
        if self._plan is None:
            self._plan = compile_plan(self)
        return self._plan


def _check_input(x: Sequence[float], n: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (n,):
        raise ValueError(f"input of shape {x.shape} for {n} qubits")
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite values")
    return x


def _check_theta(params: "ParamVector | np.ndarray", expected: int) -> np.ndarray:
    theta = params.values if isinstance(params, ParamVector) else np.asarray(params, dtype=np.float64)
    if theta.shape != (expected,):
        raise ValueError(f"parameter vector of shape {theta.shape}, expected ({expected},)")
    if not np.all(np.isfinite(theta)):
        raise ValueError("parameters contain non-finite values")
    return theta


def build_qgcn(arch: QGCNArchitecture) -> QGCNCircuit:
    """Assemble the full circuit for an architecture."""
    sizes = arch.register_sizes()
    n = arch.n_qubits
    qubit_map = list(range(n))
    gates: list[GateOp] = []
    cells: list[ConvCell] = []
    layout: list[tuple] = []
    cursor = n if arch.trainable_fm else 0

    for layer, r_l in enumerate(arch.depths):
        layer_gates, layer_cells, used = build_conv_layer(
            len(qubit_map),
            r_l,
            arch.correlated,
            qubit_map=qubit_map,
            param_base=cursor,
            layer=layer,
        )
        gates.extend(layer_gates)
        cells.extend(layer_cells)
        layout.extend(("cell", len(cells) - len(layer_cells) + k) for k in range(len(layer_cells)))
        cursor += used
        pool_gates, kept_local = build_pooling(
            len(qubit_map), qubit_map=qubit_map, gate=arch.pooling_gate
        )
        gates.extend(pool_gates)
        layout.extend(("pool", arch.pooling_gate, g.qubits[0], g.qubits[1]) for g in pool_gates)
        qubit_map = [qubit_map[i] for i in kept_local]

    assert len(qubit_map) == sizes[-1]
    param_count_ = cursor
    fm_base = 0 if arch.trainable_fm else param_count_
    fm_gates = build_feature_map(n, param_base=fm_base)
    gates = fm_gates + gates
    layout = [("fm", q, (q if arch.trainable_fm else -1)) for q in range(n)] + layout

    if arch.trainable_fm:
        segments = {"fm_freqs": (0, n), "conv_cells": (n, param_count_)}
    else:
        segments = {"conv_cells": (0, param_count_)}
    weights = arch.measure_weights or tuple(1.0 for _ in qubit_map)

    circuit = QGCNCircuit(
        arch=arch,
        gates=tuple(gates),
        cells=tuple(cells),
        kept_qubits=tuple(qubit_map),
        measure_weights=weights,
        param_count=param_count_,
        segments=segments,
        layout=tuple(layout),
    )
    _check_no_gate_after_drop(circuit)
    return circuit


def _check_no_gate_after_drop(circuit: QGCNCircuit) -> None:
    # Measurement deferral is only sound if dropped qubits stay idle.
    n = circuit.n_qubits
    dropped: set[int] = set()
    seen_pool_pairs = []
    for entry in circuit.layout:
        if entry[0] == "cell":
            cell = circuit.cells[entry[1]]
            touched = set(cell.qubits)
        elif entry[0] == "pool":
            touched = {entry[2], entry[3]}
            seen_pool_pairs.append((entry[2], entry[3]))
        else:
            touched = {entry[1]}
        if touched & dropped:
            raise AssertionError(f"gate touches dropped qubit(s) {touched & dropped}")
        if entry[0] == "pool":
            dropped.add(entry[2])
    kept = [q for q in range(n) if q not in dropped]
    if tuple(kept) != circuit.kept_qubits:
        raise AssertionError(f"kept register mismatch: {kept} vs {circuit.kept_qubits}")


def param_count(arch: QGCNArchitecture) -> int:
    """Trainable parameter total: 15 per cell group plus one frequency
    per qubit when the feature map is trainable."""
    sizes = arch.register_sizes()
    groups = 0
    for layer, r_l in enumerate(arch.depths):
        if arch.correlated:
            groups += 1
        else:
            groups += sum(len(conv_pairs(sizes[layer], j)) for j in range(r_l))
    total = CELL_PARAMS * groups
    if arch.trainable_fm:
        total += arch.n_qubits
    return total


def init_params(arch: QGCNArchitecture, seed: int) -> ParamVector:
    """Frequencies start at 1.0, cell angles uniform in [-pi, pi)."""
    circuit_params = param_count(arch)
    rng = np.random.default_rng(seed)
    n = arch.n_qubits
    if arch.trainable_fm:
        cells = circuit_params - n
        values = np.concatenate(
            [np.ones(n), rng.uniform(-np.pi, np.pi, size=cells)]
        )
        segments = {"fm_freqs": (0, n), "conv_cells": (n, circuit_params)}
    else:
        values = rng.uniform(-np.pi, np.pi, size=circuit_params)
        segments = {"conv_cells": (0, circuit_params)}
    return ParamVector(values, segments)


def compile_plan(circuit: QGCNCircuit) -> CircuitPlan:
    """Lower a built circuit to the flat array program."""
    kind, qa, qb, pp = [], [], [], []
    for entry in circuit.layout:
        if entry[0] == "fm":
            kind.append(OP_FM)
            qa.append(entry[1])
            qb.append(-1)
            pp.append(entry[2])
        elif entry[0] == "cell":
            cell = circuit.cells[entry[1]]
            slots = cell.slots
            if tuple(slots) != tuple(range(slots[0], slots[0] + CELL_PARAMS)):
                raise ValueError(f"cell slots {slots} are not consecutive")
            kind.append(OP_CELL)
            qa.append(cell.qubits[0])
            qb.append(cell.qubits[1])
            pp.append(slots[0])
        else:
            kind.append(OP_CZ if entry[1] == "CZ" else OP_CX)
            qa.append(entry[2])
            qb.append(entry[3])
            pp.append(-1)

    n = circuit.n_qubits
    dim = 2**n
    wz = np.zeros(dim)
    for q, w in zip(circuit.kept_qubits, circuit.measure_weights):
        bits = (np.arange(dim) >> (n - 1 - q)) & 1
        wz += w * (1.0 - 2.0 * bits)
    wz /= len(circuit.kept_qubits)

    return CircuitPlan(
        n_qubits=n,
        op_kind=np.asarray(kind, dtype=np.int32),
        op_a=np.asarray(qa, dtype=np.int32),
        op_b=np.asarray(qb, dtype=np.int32),
        op_param=np.asarray(pp, dtype=np.int32),
        wz=wz,
        param_count=circuit.param_count,
        trainable_fm=circuit.arch.trainable_fm,
    )


def run_aggregator(
    circuit: QGCNCircuit,
    x: Sequence[float],
    params: "ParamVector | np.ndarray",
    backend: str | None = None,
) -> float:
    """Evaluate the circuit on one input vector."""
    from . import backend as backends

    x = _check_input(x, circuit.n_qubits)
    theta = _check_theta(params, circuit.param_count)
    return backends.get_backend(backend).circuit_value(circuit.plan(), theta, x)


def run_aggregator_reference(
    circuit: QGCNCircuit, x: Sequence[float], params: "ParamVector | np.ndarray"
) -> float:
    """Gate-by-gate statevector replay. Slow; kept as the ground truth
    the fast backends are tested against."""
    gates, full = circuit.bound_gates(x, params)
    state = qsim.apply_circuit(StateVector.zero(circuit.n_qubits), gates, full)
    return qsim.expectation_weighted_z(
        state, circuit.kept_qubits, circuit.measure_weights
    )
