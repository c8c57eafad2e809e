"""Parameter-shift gradients.

Rotation generators here all have eigenvalues +-1/2, so the derivative
of the readout with respect to one resolved gate angle is exactly
(f(angle + pi/2) - f(angle - pi/2)) / 2. A parameter that feeds several
gate occurrences (correlated cells, or a frequency reused per input
component) sums the per-occurrence contributions, each weighted by the
gate's scale. Feature-map occurrences also yield the input derivative:
the angle is frequency * input, so the same shifted pair serves both.

shift_rule_grad is the plain gate-by-gate reference; value_and_grad
dispatches to the batched backend kernels. Both are checked against
central finite differences in the tests.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from . import qsim
from .circuit import ParamVector, QGCNCircuit, _check_input, _check_theta, run_aggregator

_HALF_PI = 0.5 * np.pi


def _replay_with_offset(
    n_qubits: int,
    gates: Sequence[qsim.GateOp],
    full_params: np.ndarray,
    kept: Sequence[int],
    weights: Sequence[float],
    offset_pos: int,
    offset: float,
) -> float:
    """Evaluate the bound circuit with one gate's angle nudged."""
    state = qsim.StateVector.zero(n_qubits)
    for pos, gate in enumerate(gates):
        if pos == offset_pos:
            angle = float(full_params[gate.param_index]) * gate.scale + offset
            shifted = qsim.GateOp(gate.kind, gate.qubits, 0, scale=1.0)
            state = qsim.apply_gate(state, shifted, [angle])
        else:
            state = qsim.apply_gate(state, gate, full_params)
    return qsim.expectation_weighted_z(state, kept, weights)


def shift_rule_grad(
    circuit: QGCNCircuit,
    x: Sequence[float],
    params: "ParamVector | np.ndarray",
) -> tuple[float, np.ndarray, np.ndarray]:
    """Reference gradient: two shifted replays per rotation occurrence.

    Returns (value, dtheta, dx). Quadratic-ish cost; meant for tests
    and small circuits, not the training loop.
    """
    x = _check_input(x, circuit.n_qubits)
    theta = _check_theta(params, circuit.param_count)
    gates, full = circuit.bound_gates(x, theta)
    kept, weights = circuit.kept_qubits, circuit.measure_weights

    value = _replay_with_offset(circuit.n_qubits, gates, full, kept, weights, -1, 0.0)

    dfull = np.zeros(len(full))
    fm_diffs: dict[int, float] = {}
    for pos, gate in enumerate(gates):
        if gate.param_index is None:
            continue
        plus = _replay_with_offset(
            circuit.n_qubits, gates, full, kept, weights, pos, _HALF_PI
        )
        minus = _replay_with_offset(
            circuit.n_qubits, gates, full, kept, weights, pos, -_HALF_PI
        )
        diff = 0.5 * (plus - minus)
        dfull[gate.param_index] += gate.scale * diff
        if pos < circuit.n_qubits:
            fm_diffs[gate.qubits[0]] = diff

    dtheta = dfull[: circuit.param_count]
    dx = np.zeros(circuit.n_qubits)
    freqs = (
        theta[: circuit.n_qubits]
        if circuit.arch.trainable_fm
        else np.ones(circuit.n_qubits)
    )
    for q, diff in fm_diffs.items():
        dx[q] = freqs[q] * diff
    return value, dtheta, dx


def value_and_grad(
    circuit: QGCNCircuit,
    x: Sequence[float],
    params: "ParamVector | np.ndarray",
    backend: str | None = None,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Fast path: batched parameter-shift on the selected backend."""
    from . import backend as backends

    x = _check_input(x, circuit.n_qubits)
    theta = _check_theta(params, circuit.param_count)
    return backends.get_backend(backend).circuit_value_and_grad(
        circuit.plan(), theta, x
    )


def finite_diff_grad(
    circuit: QGCNCircuit,
    x: Sequence[float],
    params: "ParamVector | np.ndarray",
    h: float = 1e-4,
    evaluate: Callable[..., float] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Central finite differences over parameters and inputs."""
    if h <= 0:
        raise ValueError(f"step must be positive, got {h}")
    x = _check_input(x, circuit.n_qubits)
    theta = _check_theta(params, circuit.param_count).copy()
    f = evaluate or run_aggregator

    dtheta = np.zeros_like(theta)
    for k in range(theta.size):
        keep = theta[k]
        theta[k] = keep + h
        hi = f(circuit, x, theta)
        theta[k] = keep - h
        lo = f(circuit, x, theta)
        theta[k] = keep
        dtheta[k] = (hi - lo) / (2 * h)

    dx = np.zeros_like(x)
    xs = x.copy()
    for i in range(xs.size):
        keep = xs[i]
        xs[i] = keep + h
        hi = f(circuit, xs, theta)
        xs[i] = keep - h
        lo = f(circuit, xs, theta)
        xs[i] = keep
        dx[i] = (hi - lo) / (2 * h)
    return dtheta, dx
