"""NumPy evaluation kernels.

Works on the flat array program produced by circuit compilation. Each
convolution cell is fused into one 4x4 unitary before application, and
the gradient path advances every shifted branch through the remaining
program as one batch, so the work is a handful of vectorized matmuls
per program step instead of a Python loop per branch.

Gradient semantics: every parameter occurrence gets one +pi/2 / -pi/2
branch pair on its resolved angle. Feature-map pairs serve double duty,
yielding both the frequency derivative (times the input component) and
the input derivative (times the frequency).
"""

from __future__ import annotations

import numpy as np

OP_FM = 0
OP_CELL = 1
OP_CZ = 2
OP_CX = 3

_HALF_PI = 0.5 * np.pi


def _rx_batch(t: np.ndarray) -> np.ndarray:
    c, s = np.cos(0.5 * t), np.sin(0.5 * t)
    out = np.empty(t.shape + (2, 2), dtype=np.complex128)
    out[..., 0, 0] = c
    out[..., 0, 1] = -1j * s
    out[..., 1, 0] = -1j * s
    out[..., 1, 1] = c
    return out


def _ry_batch(t: np.ndarray) -> np.ndarray:
    c, s = np.cos(0.5 * t), np.sin(0.5 * t)
    out = np.empty(t.shape + (2, 2), dtype=np.complex128)
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    return out


def _rz_batch(t: np.ndarray) -> np.ndarray:
    phase = np.exp(-0.5j * t)
    out = np.zeros(t.shape + (2, 2), dtype=np.complex128)
    out[..., 0, 0] = phase
    out[..., 1, 1] = np.conj(phase)
    return out


def _kron22(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.einsum("...ij,...kl->...ikjl", a, b)
    return out.reshape(a.shape[:-2] + (4, 4))


def cell_unitaries(angles: np.ndarray) -> np.ndarray:
    """Fused 4x4 cell unitaries for a batch of 15-angle rows."""
    a = np.asarray(angles, dtype=np.float64)
    squeeze = a.ndim == 1
    if squeeze:
        a = a[None, :]
    ua = _rx_batch(a[:, 2]) @ _rz_batch(a[:, 1]) @ _rx_batch(a[:, 0])
    ub = _rx_batch(a[:, 5]) @ _rz_batch(a[:, 4]) @ _rx_batch(a[:, 3])
    u = _kron22(ua, ub)
    u[:, 3, :] *= -1.0
    u = _kron22(_rz_batch(a[:, 6]), _ry_batch(a[:, 7])) @ u
    u[:, 3, :] *= -1.0
    eye = np.broadcast_to(np.eye(2, dtype=np.complex128), (a.shape[0], 2, 2))
    u = _kron22(eye, _ry_batch(a[:, 8])) @ u
    u[:, 3, :] *= -1.0
    va = _rx_batch(a[:, 11]) @ _rz_batch(a[:, 10]) @ _rx_batch(a[:, 9])
    vb = _rx_batch(a[:, 14]) @ _rz_batch(a[:, 13]) @ _rx_batch(a[:, 12])
    u = _kron22(va, vb) @ u
    return u[0] if squeeze else u


def _apply_1q(batch: np.ndarray, n: int, q: int, u: np.ndarray) -> np.ndarray:
    b = batch.shape[0]
    s = batch.reshape((b,) + (2,) * n)
    s = np.moveaxis(s, 1 + q, -1)
    shape = s.shape
    out = s.reshape(b, -1, 2) @ np.swapaxes(u, -1, -2)
    out = np.moveaxis(out.reshape(shape), -1, 1 + q)
    return np.ascontiguousarray(out).reshape(b, -1)


def _apply_2q(batch: np.ndarray, n: int, qa: int, qb: int, u: np.ndarray) -> np.ndarray:
    b = batch.shape[0]
    s = batch.reshape((b,) + (2,) * n)
    s = np.moveaxis(s, (1 + qa, 1 + qb), (-2, -1))
    shape = s.shape
    out = s.reshape(b, -1, 4) @ np.swapaxes(u, -1, -2)
    out = np.moveaxis(out.reshape(shape), (-2, -1), (1 + qa, 1 + qb))
    return np.ascontiguousarray(out).reshape(b, -1)


def _apply_cz(batch: np.ndarray, n: int, qa: int, qb: int) -> np.ndarray:
    b = batch.shape[0]
    s = batch.reshape((b,) + (2,) * n)
    idx = [slice(None)] * (n + 1)
    idx[1 + qa] = 1
    idx[1 + qb] = 1
    s[tuple(idx)] *= -1.0
    return batch


def _apply_cx(batch: np.ndarray, n: int, qa: int, qb: int) -> np.ndarray:
    b = batch.shape[0]
    s = batch.reshape((b,) + (2,) * n)
    lo = [slice(None)] * (n + 1)
    lo[1 + qa] = 1
    hi = list(lo)
    lo[1 + qb] = 0
    hi[1 + qb] = 1
    tmp = s[tuple(lo)].copy()
    s[tuple(lo)] = s[tuple(hi)]
    s[tuple(hi)] = tmp
    return batch


def _fm_angle(plan, theta: np.ndarray, x: np.ndarray, row: int) -> tuple[float, float]:
    slot = int(plan.op_param[row])
    q = int(plan.op_a[row])
    freq = float(theta[slot]) if slot >= 0 else 1.0
    return freq * float(x[q]), freq


def _measure(batch: np.ndarray, wz: np.ndarray) -> np.ndarray:
    probs = batch.real**2 + batch.imag**2
    return probs @ wz


def circuit_value(plan, theta: np.ndarray, x: np.ndarray) -> float:
    n = plan.n_qubits
    state = np.zeros((1, 2**n), dtype=np.complex128)
    state[0, 0] = 1.0
    for row in range(plan.op_kind.size):
        kind = int(plan.op_kind[row])
        a, b = int(plan.op_a[row]), int(plan.op_b[row])
        if kind == OP_FM:
            angle, _ = _fm_angle(plan, theta, x, row)
            state = _apply_1q(state, n, a, _ry_batch(np.float64(angle)))
        elif kind == OP_CELL:
            base = int(plan.op_param[row])
            state = _apply_2q(state, n, a, b, cell_unitaries(theta[base : base + 15]))
        elif kind == OP_CZ:
            state = _apply_cz(state, n, a, b)
        else:
            state = _apply_cx(state, n, a, b)
    return float(_measure(state, plan.wz)[0])


_SHIFTS = np.zeros((30, 15))
for _k in range(15):
    _SHIFTS[2 * _k, _k] = _HALF_PI
    _SHIFTS[2 * _k + 1, _k] = -_HALF_PI


def circuit_value_and_grad(plan, theta: np.ndarray, x: np.ndarray):
    """Value plus gradients w.r.t. parameters and inputs.

    Returns (value, dtheta, dx). Branch rows are spawned already
    shifted at their own program step and then ride along with the
    batch through the rest of the program.
    """
    n = plan.n_qubits
    dim = 2**n
    n_rows = int(plan.op_kind.size)
    n_cells = int(np.sum(plan.op_kind == OP_CELL))
    n_fm = int(np.sum(plan.op_kind == OP_FM))
    total_branches = 2 * n_fm + 30 * n_cells

    carrier = np.zeros((1, dim), dtype=np.complex128)
    carrier[0, 0] = 1.0
    batch = np.empty((total_branches, dim), dtype=np.complex128)
    fill = 0
    spawn: list[tuple] = []

    pm_ry = _ry_batch(np.array([_HALF_PI, -_HALF_PI]))

    for row in range(n_rows):
        kind = int(plan.op_kind[row])
        a, b = int(plan.op_a[row]), int(plan.op_b[row])
        if kind == OP_FM:
            angle, freq = _fm_angle(plan, theta, x, row)
            if fill:
                batch[:fill] = _apply_1q(
                    batch[:fill], n, a, _ry_batch(np.float64(angle))
                )
            carrier = _apply_1q(carrier, n, a, _ry_batch(np.float64(angle)))
            # A same-axis rotation composes additively, so the shifted
            # pair is the post-gate carrier plus an extra quarter turn.
            pair = _apply_1q(np.repeat(carrier, 2, axis=0), n, a, pm_ry)
            batch[fill : fill + 2] = pair
            fill += 2
            spawn.append((OP_FM, row, freq))
        elif kind == OP_CELL:
            base = int(plan.op_param[row])
            angles = theta[base : base + 15]
            if fill:
                batch[:fill] = _apply_2q(
                    batch[:fill], n, a, b, cell_unitaries(angles)
                )
            shifted = cell_unitaries(angles[None, :] + _SHIFTS)
            pre = np.repeat(carrier, 30, axis=0)
            batch[fill : fill + 30] = _apply_2q(pre, n, a, b, shifted)
            fill += 30
            spawn.append((OP_CELL, row, base))
            carrier = _apply_2q(carrier, n, a, b, cell_unitaries(angles))
        elif kind == OP_CZ:
            if fill:
                _apply_cz(batch[:fill], n, a, b)
            _apply_cz(carrier, n, a, b)
        else:
            if fill:
                _apply_cx(batch[:fill], n, a, b)
            _apply_cx(carrier, n, a, b)

    value = float(_measure(carrier, plan.wz)[0])
    vals = _measure(batch[:fill], plan.wz)
    diffs = 0.5 * (vals[0::2] - vals[1::2])

    dtheta = np.zeros(plan.param_count)
    dx = np.zeros(n)
    cursor = 0
    for kind, row, extra in spawn:
        if kind == OP_FM:
            d = diffs[cursor]
            cursor += 1
            q = int(plan.op_a[row])
            slot = int(plan.op_param[row])
            dx[q] += extra * d
            if slot >= 0:
                dtheta[slot] += float(x[q]) * d
        else:
            base = extra
            dtheta[base : base + 15] += diffs[cursor : cursor + 15]
            cursor += 15
    return value, dtheta, dx
