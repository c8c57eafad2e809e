"""Graph aggregation: input rows, mean semantics, recurrent gradients."""

import numpy as np
import pytest

from qgsage import classical as cl
from qgsage import qsim
from qgsage.aggregate import (
    ClassicalAggregator,
    QuantumAggregator,
    aggregate_neighbors,
    encode_prev,
    forward_molecule,
    forward_molecule_with_grad,
    node_input,
)
from qgsage.circuit import (
    QGCNArchitecture,
    build_qgcn,
    init_params,
    run_aggregator,
)
from qgsage.graphdata import Molecule, PreparedMolecule


def _prepared(rng, n_atoms, edges):
    feats = rng.uniform(0, np.pi, size=(n_atoms, 7))
    mol = Molecule("t", feats, edges, 0.0)
    return PreparedMolecule("t", feats, mol.neighbor_lists(), 0.0)


def _qmodel(seed, n_circuits=1, depths=(1,), sigma="identity"):
    archs = [QGCNArchitecture(8, depths) for _ in range(n_circuits)]
    circuits = [build_qgcn(a) for a in archs]
    params = [init_params(a, seed + k) for k, a in enumerate(archs)]
    return QuantumAggregator(circuits, params, sigma=sigma)


def _cmodel(seed, sigma="identity"):
    return ClassicalAggregator(cl.init_mlp((8, 9, 2, 1), seed), sigma=sigma)


def _fd_molecule(model, mol, h=1e-4):
    theta0 = model.get_params()
    grad = np.zeros_like(theta0)
    for k in range(theta0.size):
        t = theta0.copy()
        t[k] += h
        model.set_params(t)
        hi = forward_molecule(model, mol)[0]
        t[k] -= 2 * h
        model.set_params(t)
        lo = forward_molecule(model, mol)[0]
        grad[k] = (hi - lo) / (2 * h)
    model.set_params(theta0)
    return grad


class TestNodeInput:
    def test_rows_are_neighbor_features_plus_encoded_prev(self):
        rng = np.random.default_rng(0)
        mol = _prepared(rng, 3, [(0, 1), (0, 2)])
        rows = node_input(mol, 0, prev=0.5)
        assert rows.shape == (2, 8)
        np.testing.assert_array_equal(rows[0, :7], mol.features[1])
        np.testing.assert_array_equal(rows[1, :7], mol.features[2])
        assert rows[0, 7] == pytest.approx(encode_prev(0.5))

    def test_encode_prev_spans_zero_pi(self):
        assert encode_prev(-1.0) == pytest.approx(0.0)
        assert encode_prev(0.0) == pytest.approx(np.pi / 2)
        assert encode_prev(1.0) == pytest.approx(np.pi)

    def test_isolated_atom_feeds_itself(self):
        rng = np.random.default_rng(1)
        mol = _prepared(rng, 3, [(0, 1)])
        rows = node_input(mol, 2, prev=0.0)
        assert rows.shape == (1, 8)
        np.testing.assert_array_equal(rows[0, :7], mol.features[2])


class TestMeanAggregation:
    def test_mean_equals_joint_product_register_readout(self):
        # Evaluating per neighbor and averaging must equal preparing all
        # neighbor registers side by side and reading mean Z over the
        # union of kept qubits.
        arch = QGCNArchitecture(4, (1,))
        circ = build_qgcn(arch)
        pv = init_params(arch, 3)
        rng = np.random.default_rng(4)
        xs = [rng.uniform(0, np.pi, 4) for _ in range(2)]
        outs = [run_aggregator(circ, x, pv) for x in xs]

        states = []
        for x in xs:
            gates, full = circ.bound_gates(x, pv)
            states.append(
                qsim.apply_circuit(qsim.StateVector.zero(4), gates, full).amplitudes
            )
        joint = qsim.StateVector(8, np.kron(states[0], states[1]))
        kept = [1, 3, 5, 7]  # each copy keeps (1, 3); second copy offset by 4
        joint_out = qsim.expectation_weighted_z(joint, kept, [1.0] * 4)
        assert joint_out == pytest.approx(np.mean(outs), abs=1e-10)

    def test_neighbor_order_does_not_matter(self):
        model = _cmodel(7)
        rng = np.random.default_rng(8)
        rows = rng.uniform(0, np.pi, size=(4, 8))
        a = aggregate_neighbors(model, 0, rows)
        b = aggregate_neighbors(model, 0, rows[::-1])
        assert a == pytest.approx(b, abs=1e-12)

    def test_edge_order_does_not_change_prediction(self):
        rng = np.random.default_rng(9)
        feats = rng.uniform(0, np.pi, size=(4, 7))
        edges_a = [(0, 1), (1, 2), (2, 3), (0, 3)]
        edges_b = [(2, 3), (0, 3), (1, 2), (0, 1)]
        mol_a = PreparedMolecule(
            "a", feats, Molecule("a", feats, edges_a, 0.0).neighbor_lists(), 0.0
        )
        mol_b = PreparedMolecule(
            "b", feats, Molecule("b", feats, edges_b, 0.0).neighbor_lists(), 0.0
        )
        model = _cmodel(10)
        assert forward_molecule(model, mol_a)[0] == pytest.approx(
            forward_molecule(model, mol_b)[0], abs=1e-12
        )

    def test_empty_neighborhood_rejected(self):
        model = _cmodel(3)
        with pytest.raises(ValueError):
            aggregate_neighbors(model, 0, np.empty((0, 8)))


class TestForwardMolecule:
    def test_prediction_is_mean_of_node_outputs(self):
        rng = np.random.default_rng(12)
        mol = _prepared(rng, 4, [(0, 1), (1, 2), (2, 3)])
        model = _cmodel(13)
        pred, outs = forward_molecule(model, mol)
        assert len(outs) == 4
        assert pred == pytest.approx(np.mean(outs), abs=1e-12)

    def test_quantum_outputs_land_in_z_range(self):
        rng = np.random.default_rng(14)
        mol = _prepared(rng, 5, [(0, 1), (1, 2), (1, 3), (3, 4)])
        model = _qmodel(15)
        pred, outs = forward_molecule(model, mol)
        assert all(-1.0 - 1e-9 <= o <= 1.0 + 1e-9 for o in outs)
        assert -1.0 <= pred <= 1.0

    def test_prev_chain_feeds_forward(self):
        # Same features, but breaking the chain by permuting node order
        # changes the result because node v+1 sees node v's output.
        rng = np.random.default_rng(16)
        feats = rng.uniform(0, np.pi, size=(3, 7))
        mol_a = PreparedMolecule(
            "a", feats, Molecule("a", feats, [(0, 1), (1, 2)], 0.0).neighbor_lists(), 0.0
        )
        perm = [2, 0, 1]
        mol_b = PreparedMolecule(
            "b",
            feats[perm],
            Molecule("b", feats[perm], [(1, 2), (0, 2)], 0.0).neighbor_lists(),
            0.0,
        )
        model = _cmodel(17)
        pa = forward_molecule(model, mol_a)[0]
        pb = forward_molecule(model, mol_b)[0]
        assert pa != pytest.approx(pb, abs=1e-9)


class TestMoleculeGradients:
    @pytest.mark.parametrize("sigma", ["identity", "tanh"])
    def test_classical_gradient_matches_fd(self, sigma):
        rng = np.random.default_rng(21)
        mol = _prepared(rng, 4, [(0, 1), (1, 2), (2, 3), (0, 3)])
        model = _cmodel(22, sigma=sigma)
        pred, dpred, _ = forward_molecule_with_grad(model, mol)
        assert pred == pytest.approx(forward_molecule(model, mol)[0], abs=1e-12)
        np.testing.assert_allclose(dpred, _fd_molecule(model, mol), rtol=1e-5, atol=1e-8)

    def test_quantum_gradient_matches_fd(self):
        rng = np.random.default_rng(23)
        mol = _prepared(rng, 3, [(0, 1), (1, 2)])
        model = _qmodel(24)
        pred, dpred, _ = forward_molecule_with_grad(model, mol)
        assert pred == pytest.approx(forward_molecule(model, mol)[0], abs=1e-12)
        np.testing.assert_allclose(dpred, _fd_molecule(model, mol), rtol=1e-5, atol=1e-7)

    def test_quantum_tanh_gradient_matches_fd(self):
        rng = np.random.default_rng(25)
        mol = _prepared(rng, 3, [(0, 1), (0, 2)])
        model = _qmodel(26, sigma="tanh")
        _, dpred, _ = forward_molecule_with_grad(model, mol)
        np.testing.assert_allclose(dpred, _fd_molecule(model, mol), rtol=1e-5, atol=1e-7)

    def test_multi_circuit_gradient_matches_fd(self):
        rng = np.random.default_rng(27)
        mol = _prepared(rng, 4, [(0, 1), (1, 2), (2, 3)])
        model = _qmodel(28, n_circuits=2)
        _, dpred, _ = forward_molecule_with_grad(model, mol)
        np.testing.assert_allclose(dpred, _fd_molecule(model, mol), rtol=1e-5, atol=1e-7)

    def test_single_atom_molecule(self):
        rng = np.random.default_rng(29)
        mol = _prepared(rng, 1, [])
        model = _qmodel(30)
        pred, dpred, outs = forward_molecule_with_grad(model, mol)
        assert len(outs) == 1
        np.testing.assert_allclose(dpred, _fd_molecule(model, mol), rtol=1e-5, atol=1e-7)


class TestMultiMode:
    def test_hop_index_reuses_last_circuit(self):
        model = _qmodel(31, n_circuits=3)
        assert [model.hop_index(v) for v in range(6)] == [0, 1, 2, 2, 2, 2]
        assert model.multi
        circ, pv = model.hop_circuit(5)
        assert circ is model.circuits[2]
        assert pv is model.params[2]

    def test_param_slices_partition_the_flat_vector(self):
        model = _qmodel(32, n_circuits=3)
        slices = [model.param_slice(h) for h in range(3)]
        assert slices[0].start == 0
        assert all(s.stop - s.start == 68 for s in slices)
        assert slices[2].stop == model.total_params == 3 * 68
        flat = model.get_params()
        model.set_params(flat * 0.5)
        np.testing.assert_allclose(model.get_params(), flat * 0.5)

    def test_single_and_multi_differ(self):
        rng = np.random.default_rng(33)
        mol = _prepared(rng, 4, [(0, 1), (1, 2), (2, 3)])
        single = _qmodel(34, n_circuits=1)
        multi = _qmodel(34, n_circuits=3)
        assert forward_molecule(single, mol)[0] != pytest.approx(
            forward_molecule(multi, mol)[0], abs=1e-9
        )


class TestValidation:
    def test_wrong_qubit_count_rejected(self):
        arch = QGCNArchitecture(4, (1,))
        with pytest.raises(ValueError):
            QuantumAggregator([build_qgcn(arch)], [init_params(arch, 0)])

    def test_wrong_input_width_rejected(self):
        with pytest.raises(ValueError):
            ClassicalAggregator(cl.init_mlp((5, 3, 1), seed=0))

    def test_bad_sigma_rejected(self):
        with pytest.raises(ValueError):
            _cmodel(0, sigma="relu")

    def test_mismatched_params_rejected(self):
        arch = QGCNArchitecture(8, (1,))
        with pytest.raises(ValueError):
            QuantumAggregator([build_qgcn(arch)], [])
