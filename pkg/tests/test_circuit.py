"""Circuit construction: brick pattern, parameter layout, pooling register."""

import numpy as np
import pytest

from qgsage import circuit as qc
from qgsage import qsim
from qgsage.circuit import (
    ParamVector,
    QGCNArchitecture,
    build_qgcn,
    conv_pairs,
    init_params,
    param_count,
    run_aggregator_reference,
)


class TestConvPairs:
    def test_even_cycle_covers_even_offsets(self):
        assert conv_pairs(8, 0) == [(0, 1), (2, 3), (4, 5), (6, 7)]
        assert conv_pairs(8, 2) == [(0, 1), (2, 3), (4, 5), (6, 7)]
        assert conv_pairs(4, 0) == [(0, 1), (2, 3)]

    def test_odd_cycle_covers_odd_offsets(self):
        assert conv_pairs(8, 1) == [(1, 2), (3, 4), (5, 6)]
        assert conv_pairs(4, 1) == [(1, 2)]

    def test_two_qubit_register_falls_back_to_single_pair(self):
        assert conv_pairs(2, 0) == [(0, 1)]
        assert conv_pairs(2, 1) == [(0, 1)]
        assert conv_pairs(2, 5) == [(0, 1)]

    def test_rejects_bad_register_or_cycle(self):
        with pytest.raises(ValueError):
            conv_pairs(1, 0)
        with pytest.raises(ValueError):
            conv_pairs(4, -1)


class TestParamCount:
    def test_deep_and_wide_eight_qubit_architectures_match(self):
        # Both shapes resolve to 19 cells: 19 * 15 + 8 = 293.
        assert param_count(QGCNArchitecture(8, (3, 5))) == 293
        assert param_count(QGCNArchitecture(8, (3, 3, 3))) == 293

    def test_single_cycle_eight_qubits(self):
        # 4 cells * 15 + 8 frequencies.
        assert param_count(QGCNArchitecture(8, (1,))) == 68

    def test_cell_counts_by_layer(self):
        c1 = build_qgcn(QGCNArchitecture(8, (3, 5)))
        assert len(c1.cells) == 19
        assert sum(1 for c in c1.cells if c.layer == 0) == 11
        assert sum(1 for c in c1.cells if c.layer == 1) == 8
        c2 = build_qgcn(QGCNArchitecture(8, (3, 3, 3)))
        assert [sum(1 for c in c2.cells if c.layer == l) for l in range(3)] == [11, 5, 3]

    def test_single_layer_scan_sizes(self):
        expect = {4: 79, 6: 126, 8: 173, 10: 220, 12: 267}
        for n, total in expect.items():
            assert param_count(QGCNArchitecture(n, (3,))) == total

    def test_correlated_shares_one_block_per_layer(self):
        assert param_count(QGCNArchitecture(8, (3, 5), correlated=True)) == 2 * 15 + 8
        assert param_count(QGCNArchitecture(12, (3,), correlated=True)) == 15 + 12

    def test_fixed_frequencies_drop_their_slots(self):
        assert param_count(QGCNArchitecture(8, (1,), trainable_fm=False)) == 60

    def test_matches_built_circuit(self):
        for arch in (
            QGCNArchitecture(8, (3, 5)),
            QGCNArchitecture(4, (2, 1), correlated=True),
            QGCNArchitecture(6, (3,), trainable_fm=False),
        ):
            assert build_qgcn(arch).param_count == param_count(arch)


class TestRegisterFlow:
    def test_register_halves_per_layer(self):
        assert QGCNArchitecture(8, (3, 3, 3)).register_sizes() == [8, 4, 2, 1]
        assert QGCNArchitecture(8, (3, 5)).register_sizes() == [8, 4, 2]

    def test_kept_qubits_are_odd_survivors(self):
        assert build_qgcn(QGCNArchitecture(8, (1,))).kept_qubits == (1, 3, 5, 7)
        assert build_qgcn(QGCNArchitecture(8, (1, 1))).kept_qubits == (3, 7)
        assert build_qgcn(QGCNArchitecture(8, (1, 1, 1))).kept_qubits == (7,)

    def test_odd_register_is_rejected(self):
        with pytest.raises(ValueError):
            QGCNArchitecture(6, (1, 1))

    def test_too_small_register_is_rejected(self):
        with pytest.raises(ValueError):
            QGCNArchitecture(2, (1, 1))

    def test_arch_validation(self):
        with pytest.raises(ValueError):
            QGCNArchitecture(1, (1,))
        with pytest.raises(ValueError):
            QGCNArchitecture(4, ())
        with pytest.raises(ValueError):
            QGCNArchitecture(4, (0,))
        with pytest.raises(ValueError):
            QGCNArchitecture(4, (1,), pooling_gate="SWAP")
        with pytest.raises(ValueError):
            QGCNArchitecture(4, (1,), measure_weights=(1.0,))

    def test_gates_never_touch_dropped_qubits(self):
        # Dropped register positions must stay idle or measurement
        # deferral would be unsound; scan the raw gate list directly.
        circ = build_qgcn(QGCNArchitecture(8, (2, 2)))
        dropped = set()
        pool_seen = 0
        pool_starts = {}
        for gate in circ.gates:
            assert not (set(gate.qubits) & dropped), f"{gate} touches {dropped}"
            if gate.kind == "CZ":
                pool_starts.setdefault(gate.qubits, 0)
        # Recover pooling gates from the layout and drop as they fire.
        for entry in circ.layout:
            if entry[0] == "pool":
                dropped.add(entry[2])
                pool_seen += 1
        assert pool_seen == 4 + 2
        assert circ.kept_qubits == (3, 7)


class TestCellStructure:
    def test_cell_is_fifteen_parameters_eighteen_gates(self):
        gates = qc._cell_gates(0, 1, range(15))
        assert len(gates) == 18
        assert sum(1 for g in gates if g.kind == "CZ") == 3
        rotations = [g for g in gates if g.kind != "CZ"]
        assert [g.param_index for g in rotations] == list(range(15))

    def test_cell_unitary_matches_gate_replay(self):
        rng = np.random.default_rng(41)
        for _ in range(10):
            angles = rng.uniform(-np.pi, np.pi, size=15)
            dense = qc.cell_unitary(angles)
            u = np.eye(4, dtype=np.complex128)
            for gate in qc._cell_gates(0, 1, range(15)):
                u = qsim.gate_unitary(gate, 2, angles) @ u
            np.testing.assert_allclose(dense, u, atol=1e-12)

    def test_all_zero_cell_collapses_to_cz(self):
        np.testing.assert_allclose(
            qc.cell_unitary(np.zeros(15)), np.diag([1, 1, 1, -1]), atol=1e-15
        )

    def test_uncorrelated_slots_are_disjoint(self):
        circ = build_qgcn(QGCNArchitecture(8, (3, 5)))
        seen = set()
        for cell in circ.cells:
            assert not (set(cell.slots) & seen)
            seen.update(cell.slots)
        assert seen == set(range(8, 293))

    def test_correlated_slots_shared_within_layer_only(self):
        circ = build_qgcn(QGCNArchitecture(8, (3, 5), correlated=True))
        by_layer = {}
        for cell in circ.cells:
            by_layer.setdefault(cell.layer, set()).add(cell.slots)
        assert all(len(v) == 1 for v in by_layer.values())
        assert by_layer[0] != by_layer[1]


class TestParamVector:
    def test_segments_must_tile(self):
        ParamVector(np.zeros(5), {"a": (0, 2), "b": (2, 5)})
        with pytest.raises(ValueError):
            ParamVector(np.zeros(5), {"a": (0, 2), "b": (3, 5)})
        with pytest.raises(ValueError):
            ParamVector(np.zeros(5), {"a": (0, 2), "b": (2, 4)})
        with pytest.raises(ValueError):
            ParamVector(np.zeros(5), {"a": (0, 6)})

    def test_segment_views_share_storage(self):
        pv = ParamVector(np.zeros(4), {"a": (0, 1), "b": (1, 4)})
        pv.segment("b")[0] = 7.0
        assert pv.values[1] == 7.0

    def test_init_params_layout(self):
        arch = QGCNArchitecture(8, (3, 5))
        pv = init_params(arch, seed=123)
        assert len(pv) == 293
        np.testing.assert_array_equal(pv.segment("fm_freqs"), np.ones(8))
        cells = pv.segment("conv_cells")
        assert cells.size == 285
        assert np.all(np.abs(cells) <= np.pi)
        again = init_params(arch, seed=123)
        np.testing.assert_array_equal(pv.values, again.values)
        assert not np.array_equal(pv.values, init_params(arch, seed=124).values)


class TestReferenceEvaluation:
    def test_idle_circuit_reads_plus_one(self):
        # Zero input keeps the state at |0...0>; zero-angle cells are
        # plain CZs which fix basis states, so every Z reads +1.
        circ = build_qgcn(QGCNArchitecture(8, (3, 5)))
        params = circ.param_template()
        params.segment("fm_freqs")[:] = 1.0
        assert run_aggregator_reference(circ, np.zeros(8), params) == pytest.approx(1.0)

    def test_two_qubit_output_is_cosine_of_kept_angle(self):
        # With zero cell angles the entanglers cancel pairwise on this
        # shape and the kept qubit sees only its feature-map rotation.
        circ = build_qgcn(QGCNArchitecture(2, (1,)))
        params = circ.param_template()
        params.segment("fm_freqs")[:] = 1.0
        a, b = 0.83, -0.61
        out = run_aggregator_reference(circ, [a, b], params)
        assert out == pytest.approx(np.cos(b), abs=1e-12)

    def test_frequency_scales_the_input_angle(self):
        circ = build_qgcn(QGCNArchitecture(2, (1,)))
        params = circ.param_template()
        params.segment("fm_freqs")[:] = [1.0, 2.0]
        out = run_aggregator_reference(circ, [0.5, 0.9], params)
        assert out == pytest.approx(np.cos(1.8), abs=1e-12)

    def test_fixed_frequencies_match_unit_frequencies(self):
        rng = np.random.default_rng(77)
        fixed = build_qgcn(QGCNArchitecture(4, (2,), trainable_fm=False))
        free = build_qgcn(QGCNArchitecture(4, (2,)))
        cells = rng.uniform(-np.pi, np.pi, size=fixed.param_count)
        x = rng.uniform(0, np.pi, size=4)
        a = run_aggregator_reference(fixed, x, cells)
        b = run_aggregator_reference(free, x, np.concatenate([np.ones(4), cells]))
        assert a == pytest.approx(b, abs=1e-12)

    def test_measure_weights_reweight_kept_qubits(self):
        rng = np.random.default_rng(5)
        arch_w = QGCNArchitecture(4, (1,), measure_weights=(2.0, 0.0))
        arch_u = QGCNArchitecture(4, (1,))
        cw, cu = build_qgcn(arch_w), build_qgcn(arch_u)
        theta = rng.uniform(-np.pi, np.pi, size=cw.param_count)
        theta[:4] = 1.0
        x = rng.uniform(0, np.pi, size=4)
        gates, full = cu.bound_gates(x, theta)
        state = qsim.apply_circuit(qsim.StateVector.zero(4), gates, full)
        z1 = qsim.expectation_weighted_z(state, [1], [1.0])
        assert run_aggregator_reference(cw, x, theta) == pytest.approx(z1, abs=1e-12)

    def test_input_and_param_validation(self):
        circ = build_qgcn(QGCNArchitecture(4, (1,)))
        theta = np.zeros(circ.param_count)
        with pytest.raises(ValueError):
            run_aggregator_reference(circ, np.zeros(3), theta)
        with pytest.raises(ValueError):
            run_aggregator_reference(circ, [np.nan, 0, 0, 0], theta)
        with pytest.raises(ValueError):
            run_aggregator_reference(circ, np.zeros(4), np.zeros(5))


class TestPlan:
    def test_plan_row_counts(self):
        circ = build_qgcn(QGCNArchitecture(8, (3, 5)))
        plan = circ.plan()
        kinds = plan.op_kind.tolist()
        assert kinds.count(qc.OP_FM) == 8
        assert kinds.count(qc.OP_CELL) == 19
        assert kinds.count(qc.OP_CZ) == 4 + 2
        assert plan.param_count == 293

    def test_wz_table_matches_manual_signs(self):
        circ = build_qgcn(QGCNArchitecture(4, (1,), measure_weights=(1.0, 3.0)))
        plan = circ.plan()
        # kept qubits are 1 and 3; index bits (q0 q1 q2 q3), MSB first.
        for idx in range(16):
            b1 = (idx >> 2) & 1
            b3 = idx & 1
            expect = (1.0 * (1 - 2 * b1) + 3.0 * (1 - 2 * b3)) / 2
            assert plan.wz[idx] == pytest.approx(expect)

    def test_pooling_gate_choice_lands_in_plan(self):
        circ = build_qgcn(QGCNArchitecture(4, (1,), pooling_gate="CX"))
        assert qc.OP_CX in circ.plan().op_kind.tolist()
        assert qc.OP_CZ not in circ.plan().op_kind.tolist()
