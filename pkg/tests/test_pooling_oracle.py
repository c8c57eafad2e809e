"""Deferred measurement vs explicit mid-circuit partial traces.

The evaluation path keeps a pure state and only drops register
positions logically; these tests rebuild each architecture with real
traces after every pooling step and demand agreement to 1e-10.
"""

import numpy as np
import pytest

from _oracles import density_oracle_value
from qgsage.circuit import QGCNArchitecture, build_qgcn, init_params, run_aggregator

ARCHS = [
    QGCNArchitecture(4, (1,)),
    QGCNArchitecture(4, (2,)),
    QGCNArchitecture(4, (3,)),
    QGCNArchitecture(4, (1, 1)),
    QGCNArchitecture(4, (2, 1)),
    QGCNArchitecture(4, (3, 3)),
    QGCNArchitecture(4, (2,), correlated=True),
    QGCNArchitecture(4, (1,), pooling_gate="CX"),
    QGCNArchitecture(6, (1,)),
    QGCNArchitecture(6, (3,)),
    QGCNArchitecture(6, (2,), correlated=True),
    QGCNArchitecture(6, (1,), measure_weights=(1.5, -0.5, 1.0)),
]


@pytest.mark.parametrize("arch", ARCHS, ids=str)
def test_pure_state_pooling_matches_explicit_traces(arch):
    circ = build_qgcn(arch)
    for seed in range(5):
        rng = np.random.default_rng(7000 + seed)
        pv = init_params(arch, 7000 + seed)
        if arch.trainable_fm:
            pv.segment("fm_freqs")[:] = rng.uniform(0.5, 1.5, arch.n_qubits)
        x = rng.uniform(0, np.pi, size=arch.n_qubits)
        fast = run_aggregator(circ, x, pv)
        slow = density_oracle_value(circ, x, pv)
        assert fast == pytest.approx(slow, abs=1e-10)


def test_traced_register_is_generally_mixed():
    # Guard against the oracle being trivial: after pooling, the kept
    # register is usually not pure, so the trace is doing real work.
    from qgsage import qsim

    arch = QGCNArchitecture(4, (2,))
    circ = build_qgcn(arch)
    pv = init_params(arch, 99)
    x = np.random.default_rng(99).uniform(0, np.pi, 4)
    gates, full = circ.bound_gates(x, pv)
    state = qsim.apply_circuit(qsim.StateVector.zero(4), gates, full)
    reduced = qsim.partial_trace(state, traced=[0, 2])
    purity = float(np.real(np.trace(reduced.entries @ reduced.entries)))
    assert purity < 0.999
