"""Backend kernels against the gate-by-gate reference simulator."""

import numpy as np
import pytest

from qgsage import backend
from qgsage.circuit import (
    QGCNArchitecture,
    build_qgcn,
    init_params,
    run_aggregator,
    run_aggregator_reference,
)
from qgsage.grad import shift_rule_grad

ARCHS = [
    QGCNArchitecture(4, (1,)),
    QGCNArchitecture(4, (3,)),
    QGCNArchitecture(4, (2, 1)),
    QGCNArchitecture(4, (1, 1)),
    QGCNArchitecture(6, (2,)),
    QGCNArchitecture(4, (2,), correlated=True),
    QGCNArchitecture(4, (2,), trainable_fm=False),
    QGCNArchitecture(4, (1,), pooling_gate="CX"),
    QGCNArchitecture(4, (1,), measure_weights=(0.5, 2.0)),
    QGCNArchitecture(8, (3, 5)),
]

BACKENDS = ["python"] + (["compiled"] if backend.have_compiled() else [])


def _point(arch, seed):
    circ = build_qgcn(arch)
    rng = np.random.default_rng(seed)
    pv = init_params(arch, seed)
    if arch.trainable_fm:
        pv.segment("fm_freqs")[:] = rng.uniform(0.5, 1.5, size=arch.n_qubits)
    x = rng.uniform(0, np.pi, size=arch.n_qubits)
    return circ, pv, x


@pytest.mark.parametrize("name", BACKENDS)
class TestAgainstReference:
    def test_values_match_reference(self, name):
        for k, arch in enumerate(ARCHS):
            circ, pv, x = _point(arch, 100 + k)
            want = run_aggregator_reference(circ, x, pv)
            got = run_aggregator(circ, x, pv, backend=name)
            assert got == pytest.approx(want, abs=1e-10), arch

    def test_gradients_match_shift_rule_reference(self, name):
        be = backend.get_backend(name)
        for k, arch in enumerate(ARCHS[:-1]):  # skip the big one, covered below
            circ, pv, x = _point(arch, 200 + k)
            v_ref, dt_ref, dx_ref = shift_rule_grad(circ, x, pv)
            v, dt, dx = be.circuit_value_and_grad(circ.plan(), pv.values, x)
            assert v == pytest.approx(v_ref, abs=1e-10), arch
            np.testing.assert_allclose(dt, dt_ref, atol=1e-10, err_msg=str(arch))
            np.testing.assert_allclose(dx, dx_ref, atol=1e-10, err_msg=str(arch))

    def test_grad_value_equals_plain_value(self, name):
        be = backend.get_backend(name)
        circ, pv, x = _point(QGCNArchitecture(8, (3, 5)), 17)
        v, _, _ = be.circuit_value_and_grad(circ.plan(), pv.values, x)
        assert v == pytest.approx(be.circuit_value(circ.plan(), pv.values, x), abs=1e-13)

    def test_bitwise_deterministic(self, name):
        be = backend.get_backend(name)
        circ, pv, x = _point(QGCNArchitecture(6, (2,)), 23)
        a = be.circuit_value_and_grad(circ.plan(), pv.values, x)
        b = be.circuit_value_and_grad(circ.plan(), pv.values, x)
        assert a[0] == b[0]
        np.testing.assert_array_equal(a[1], b[1])
        np.testing.assert_array_equal(a[2], b[2])


@pytest.mark.skipif(not backend.have_compiled(), reason="extension not built")
def test_compiled_and_python_agree_tightly():
    for k, arch in enumerate(ARCHS):
        circ, pv, x = _point(arch, 300 + k)
        plan = circ.plan()
        vp, dtp, dxp = backend.get_backend("python").circuit_value_and_grad(
            plan, pv.values, x
        )
        vc, dtc, dxc = backend.get_backend("compiled").circuit_value_and_grad(
            plan, pv.values, x
        )
        assert vp == pytest.approx(vc, abs=1e-12)
        np.testing.assert_allclose(dtp, dtc, atol=1e-12)
        np.testing.assert_allclose(dxp, dxc, atol=1e-12)


class TestSelection:
    def test_env_override(self, monkeypatch):
        monkeypatch.setenv("QGSAGE_BACKEND", "python")
        assert backend.active_backend() == "python"
        assert backend.get_backend().__name__.endswith("_core_py")

    def test_env_rejects_unknown(self, monkeypatch):
        monkeypatch.setenv("QGSAGE_BACKEND", "gpu")
        with pytest.raises(ValueError):
            backend.active_backend()

    def test_unknown_name_rejected(self):
        with pytest.raises(ValueError):
            backend.get_backend("fortran")

    def test_missing_extension_reported(self, monkeypatch):
        monkeypatch.setattr(backend, "_core_cy", None)
        with pytest.raises(RuntimeError):
            backend.get_backend("compiled")
        assert backend.active_backend() == "python"

    def test_default_prefers_compiled_when_built(self):
        if backend.have_compiled():
            assert backend.active_backend() == "compiled"
        else:
            assert backend.active_backend() == "python"
