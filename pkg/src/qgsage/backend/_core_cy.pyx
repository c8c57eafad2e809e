# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled statevector kernels.

Semantics mirror _core_py exactly; the layout is different. States are
interleaved re/im double arrays, each convolution cell is fused into a
4x4 unitary once per evaluation, and the gradient path caches the
prefix state in front of every parametric step so each shifted branch
only replays its own suffix on a single scratch row (two rows of state
in cache per step, no batch-wide traffic).
"""

import numpy as np

from libc.math cimport M_PI, cos, sin
from libc.string cimport memcpy

NAME = "compiled"

cdef enum:
    OP_FM = 0
    OP_CELL = 1
    OP_CZ = 2
    OP_CX = 3

cdef enum:
    ROT_RX = 0
    ROT_RY = 1
    ROT_RZ = 2


cdef inline void _rot2(int kind, double t, double* u) noexcept nogil:
    # 2x2 complex, entries at u[2*(2*i+j)] (re) and +1 (im).
    cdef double c = cos(0.5 * t)
    cdef double s = sin(0.5 * t)
    if kind == ROT_RX:
        u[0] = c; u[1] = 0.0; u[2] = 0.0; u[3] = -s
        u[4] = 0.0; u[5] = -s; u[6] = c; u[7] = 0.0
    elif kind == ROT_RY:
        u[0] = c; u[1] = 0.0; u[2] = -s; u[3] = 0.0
        u[4] = s; u[5] = 0.0; u[6] = c; u[7] = 0.0
    else:
        u[0] = c; u[1] = -s; u[2] = 0.0; u[3] = 0.0
        u[4] = 0.0; u[5] = 0.0; u[6] = c; u[7] = s


cdef inline void _eye2(double* u) noexcept nogil:
    u[0] = 1.0; u[1] = 0.0; u[2] = 0.0; u[3] = 0.0
    u[4] = 0.0; u[5] = 0.0; u[6] = 1.0; u[7] = 0.0


cdef inline void _mm2(const double* a, const double* b, double* out) noexcept nogil:
    cdef int i, j, k
    cdef double re, im, ar, ai, br, bi
    for i in range(2):
        for j in range(2):
            re = 0.0
            im = 0.0
            for k in range(2):
                ar = a[2 * (2 * i + k)]
                ai = a[2 * (2 * i + k) + 1]
                br = b[2 * (2 * k + j)]
                bi = b[2 * (2 * k + j) + 1]
                re += ar * br - ai * bi
                im += ar * bi + ai * br
            out[2 * (2 * i + j)] = re
            out[2 * (2 * i + j) + 1] = im


cdef inline void _kron22(const double* a, const double* b, double* out) noexcept nogil:
    cdef int i, j, k, l, r, c
    cdef double ar, ai, br, bi
    for i in range(2):
        for j in range(2):
            ar = a[2 * (2 * i + j)]
            ai = a[2 * (2 * i + j) + 1]
            for k in range(2):
                for l in range(2):
                    br = b[2 * (2 * k + l)]
                    bi = b[2 * (2 * k + l) + 1]
                    r = 2 * i + k
                    c = 2 * j + l
                    out[2 * (4 * r + c)] = ar * br - ai * bi
                    out[2 * (4 * r + c) + 1] = ar * bi + ai * br


cdef inline void _mm4(const double* a, const double* b, double* out) noexcept nogil:
    cdef int i, j, k
    cdef double re, im, ar, ai, br, bi
    for i in range(4):
        for j in range(4):
            re = 0.0
            im = 0.0
            for k in range(4):
                ar = a[2 * (4 * i + k)]
                ai = a[2 * (4 * i + k) + 1]
                br = b[2 * (4 * k + j)]
                bi = b[2 * (4 * k + j) + 1]
                re += ar * br - ai * bi
                im += ar * bi + ai * br
            out[2 * (4 * i + j)] = re
            out[2 * (4 * i + j) + 1] = im


cdef inline void _cz_left(double* u) noexcept nogil:
    # CZ @ U negates row 3.
    cdef int j
    for j in range(4):
        u[2 * (12 + j)] = -u[2 * (12 + j)]
        u[2 * (12 + j) + 1] = -u[2 * (12 + j) + 1]


cdef void _build_cell(const double* ang, double* u) noexcept nogil:
    cdef double ra[8]
    cdef double rb[8]
    cdef double t[8]
    cdef double u1[8]
    cdef double u2[8]
    cdef double k4[32]
    cdef double tmp[32]

    _rot2(ROT_RX, ang[0], ra)
    _rot2(ROT_RZ, ang[1], rb)
    _mm2(rb, ra, t)
    _rot2(ROT_RX, ang[2], ra)
    _mm2(ra, t, u1)
    _rot2(ROT_RX, ang[3], ra)
    _rot2(ROT_RZ, ang[4], rb)
    _mm2(rb, ra, t)
    _rot2(ROT_RX, ang[5], ra)
    _mm2(ra, t, u2)
    _kron22(u1, u2, u)
    _cz_left(u)
    _rot2(ROT_RZ, ang[6], ra)
    _rot2(ROT_RY, ang[7], rb)
    _kron22(ra, rb, k4)
    _mm4(k4, u, tmp)
    memcpy(u, tmp, 32 * sizeof(double))
    _cz_left(u)
    _eye2(ra)
    _rot2(ROT_RY, ang[8], rb)
    _kron22(ra, rb, k4)
    _mm4(k4, u, tmp)
    memcpy(u, tmp, 32 * sizeof(double))
    _cz_left(u)
    _rot2(ROT_RX, ang[9], ra)
    _rot2(ROT_RZ, ang[10], rb)
    _mm2(rb, ra, t)
    _rot2(ROT_RX, ang[11], ra)
    _mm2(ra, t, u1)
    _rot2(ROT_RX, ang[12], ra)
    _rot2(ROT_RZ, ang[13], rb)
    _mm2(rb, ra, t)
    _rot2(ROT_RX, ang[14], ra)
    _mm2(ra, t, u2)
    _kron22(u1, u2, k4)
    _mm4(k4, u, tmp)
    memcpy(u, tmp, 32 * sizeof(double))


cdef void _apply_1q(double* s, int n, int q, const double* u) noexcept nogil:
    cdef long dim = 1L << n
    cdef long sq = 1L << (n - 1 - q)
    cdef long idx, p0, p1
    cdef double x0r, x0i, x1r, x1i, y0r, y0i, y1r, y1i
    for idx in range(dim):
        if idx & sq:
            continue
        p0 = 2 * idx
        p1 = 2 * (idx + sq)
        x0r = s[p0]; x0i = s[p0 + 1]
        x1r = s[p1]; x1i = s[p1 + 1]
        y0r = u[0] * x0r - u[1] * x0i + u[2] * x1r - u[3] * x1i
        y0i = u[0] * x0i + u[1] * x0r + u[2] * x1i + u[3] * x1r
        y1r = u[4] * x0r - u[5] * x0i + u[6] * x1r - u[7] * x1i
        y1i = u[4] * x0i + u[5] * x0r + u[6] * x1i + u[7] * x1r
        s[p0] = y0r; s[p0 + 1] = y0i
        s[p1] = y1r; s[p1 + 1] = y1i


cdef void _apply_2q(double* s, int n, int qa, int qb, const double* u) noexcept nogil:
    cdef long sa = 1L << (n - 1 - qa)
    cdef long sb = 1L << (n - 1 - qb)
    cdef long dim = 1L << n
    cdef long idx, p0, p1, p2, p3
    cdef double x0r, x0i, x1r, x1i, x2r, x2i, x3r, x3i
    cdef double y0r, y0i, y1r, y1i, y2r, y2i, y3r, y3i
    for idx in range(dim):
        if (idx & sa) or (idx & sb):
            continue
        p0 = 2 * idx
        p1 = 2 * (idx + sb)
        p2 = 2 * (idx + sa)
        p3 = 2 * (idx + sa + sb)
        x0r = s[p0]; x0i = s[p0 + 1]
        x1r = s[p1]; x1i = s[p1 + 1]
        x2r = s[p2]; x2i = s[p2 + 1]
        x3r = s[p3]; x3i = s[p3 + 1]
        y0r = u[0] * x0r - u[1] * x0i + u[2] * x1r - u[3] * x1i + u[4] * x2r - u[5] * x2i + u[6] * x3r - u[7] * x3i
        y0i = u[0] * x0i + u[1] * x0r + u[2] * x1i + u[3] * x1r + u[4] * x2i + u[5] * x2r + u[6] * x3i + u[7] * x3r
        y1r = u[8] * x0r - u[9] * x0i + u[10] * x1r - u[11] * x1i + u[12] * x2r - u[13] * x2i + u[14] * x3r - u[15] * x3i
        y1i = u[8] * x0i + u[9] * x0r + u[10] * x1i + u[11] * x1r + u[12] * x2i + u[13] * x2r + u[14] * x3i + u[15] * x3r
        y2r = u[16] * x0r - u[17] * x0i + u[18] * x1r - u[19] * x1i + u[20] * x2r - u[21] * x2i + u[22] * x3r - u[23] * x3i
        y2i = u[16] * x0i + u[17] * x0r + u[18] * x1i + u[19] * x1r + u[20] * x2i + u[21] * x2r + u[22] * x3i + u[23] * x3r
        y3r = u[24] * x0r - u[25] * x0i + u[26] * x1r - u[27] * x1i + u[28] * x2r - u[29] * x2i + u[30] * x3r - u[31] * x3i
        y3i = u[24] * x0i + u[25] * x0r + u[26] * x1i + u[27] * x1r + u[28] * x2i + u[29] * x2r + u[30] * x3i + u[31] * x3r
        s[p0] = y0r; s[p0 + 1] = y0i
        s[p1] = y1r; s[p1 + 1] = y1i
        s[p2] = y2r; s[p2 + 1] = y2i
        s[p3] = y3r; s[p3 + 1] = y3i


cdef void _apply_cz(double* s, int n, int qa, int qb) noexcept nogil:
    cdef long sa = 1L << (n - 1 - qa)
    cdef long sb = 1L << (n - 1 - qb)
    cdef long mask = sa | sb
    cdef long dim = 1L << n
    cdef long idx
    for idx in range(dim):
        if (idx & mask) == mask:
            s[2 * idx] = -s[2 * idx]
            s[2 * idx + 1] = -s[2 * idx + 1]


cdef void _apply_cx(double* s, int n, int qa, int qb) noexcept nogil:
    cdef long sa = 1L << (n - 1 - qa)
    cdef long sb = 1L << (n - 1 - qb)
    cdef long dim = 1L << n
    cdef long idx, p0, p1
    cdef double tr, ti
    for idx in range(dim):
        if (idx & sa) and not (idx & sb):
            p0 = 2 * idx
            p1 = 2 * (idx + sb)
            tr = s[p0]; ti = s[p0 + 1]
            s[p0] = s[p1]; s[p0 + 1] = s[p1 + 1]
            s[p1] = tr; s[p1 + 1] = ti


cdef double _measure(const double* s, const double* wz, long dim) noexcept nogil:
    cdef long k
    cdef double total = 0.0
    for k in range(dim):
        total += (s[2 * k] * s[2 * k] + s[2 * k + 1] * s[2 * k + 1]) * wz[k]
    return total


cdef void _walk(
    double* s,
    int start,
    int n_rows,
    const int* kind,
    const int* qa,
    const int* qb,
    const int* cidx,
    const double* fm_u,
    const double* cell_u,
    int n,
) noexcept nogil:
    # fm_u is indexed by row (feature-map rows lead the program),
    # cell_u by the per-row cell index.
    cdef int row, k
    for row in range(start, n_rows):
        k = kind[row]
        if k == OP_CELL:
            _apply_2q(s, n, qa[row], qb[row], cell_u + 32 * cidx[row])
        elif k == OP_CZ:
            _apply_cz(s, n, qa[row], qb[row])
        elif k == OP_CX:
            _apply_cx(s, n, qa[row], qb[row])
        else:
            _apply_1q(s, n, qa[row], fm_u + 8 * row)


def _prep(plan, theta, x):
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    x = np.ascontiguousarray(x, dtype=np.float64)
    kind = np.ascontiguousarray(plan.op_kind, dtype=np.intc)
    qa = np.ascontiguousarray(plan.op_a, dtype=np.intc)
    qb = np.ascontiguousarray(plan.op_b, dtype=np.intc)
    pp = np.ascontiguousarray(plan.op_param, dtype=np.intc)
    wz = np.ascontiguousarray(plan.wz, dtype=np.float64)
    n_fm = int(np.sum(kind == OP_FM))
    if not np.all(kind[:n_fm] == OP_FM):
        raise ValueError("feature-map rows must lead the program")
    cidx = np.full(kind.size, -1, dtype=np.intc)
    cidx[kind == OP_CELL] = np.arange(int(np.sum(kind == OP_CELL)), dtype=np.intc)
    return theta, x, kind, qa, qb, pp, wz, n_fm, cidx


def circuit_value(plan, theta, x):
    theta_, x_, kind_, qa_, qb_, pp_, wz_, n_fm, cidx_ = _prep(plan, theta, x)
    cdef double[::1] th = theta_
    cdef double[::1] xv = x_
    cdef int[::1] kind = kind_
    cdef int[::1] qa = qa_
    cdef int[::1] qb = qb_
    cdef int[::1] pp = pp_
    cdef double[::1] wz = wz_
    cdef int[::1] cidx = cidx_

    cdef int n = int(plan.n_qubits)
    cdef long dim = 1L << n
    cdef int n_rows = kind.shape[0]
    cdef int nfm = n_fm
    cdef int n_cells = int(np.sum(kind_ == OP_CELL))

    state_arr = np.zeros(2 * dim, dtype=np.float64)
    state_arr[0] = 1.0
    fm_arr = np.empty(8 * max(nfm, 1), dtype=np.float64)
    cell_arr = np.empty(32 * max(n_cells, 1), dtype=np.float64)
    cdef double[::1] state = state_arr
    cdef double[::1] fm_u = fm_arr
    cdef double[::1] cell_u = cell_arr

    cdef int row, slot, q, c
    cdef double angle, freq, value
    with nogil:
        c = 0
        for row in range(n_rows):
            if kind[row] == OP_FM:
                slot = pp[row]
                q = qa[row]
                freq = th[slot] if slot >= 0 else 1.0
                angle = freq * xv[q]
                _rot2(ROT_RY, angle, &fm_u[8 * row])
            elif kind[row] == OP_CELL:
                _build_cell(&th[pp[row]], &cell_u[32 * c])
                c += 1
        _walk(&state[0], 0, n_rows, &kind[0], &qa[0], &qb[0], &cidx[0], &fm_u[0], &cell_u[0], n)
        value = _measure(&state[0], &wz[0], dim)
    return float(value)


def circuit_value_and_grad(plan, theta, x):
    theta_, x_, kind_, qa_, qb_, pp_, wz_, n_fm, cidx_ = _prep(plan, theta, x)
    cdef double[::1] th = theta_
    cdef double[::1] xv = x_
    cdef int[::1] kind = kind_
    cdef int[::1] qa = qa_
    cdef int[::1] qb = qb_
    cdef int[::1] pp = pp_
    cdef double[::1] wz = wz_
    cdef int[::1] cidx = cidx_

    cdef int n = int(plan.n_qubits)
    cdef long dim = 1L << n
    cdef long nbytes = 2 * dim * sizeof(double)
    cdef int n_rows = kind.shape[0]
    cdef int nfm = n_fm
    cdef int n_cells = int(np.sum(kind_ == OP_CELL))
    cdef int n_params = int(plan.param_count)

    carrier_arr = np.zeros(2 * dim, dtype=np.float64)
    carrier_arr[0] = 1.0
    scratch_arr = np.empty(2 * dim, dtype=np.float64)
    postfm_arr = np.empty(2 * dim, dtype=np.float64)
    cache_arr = np.empty((max(n_cells, 1), 2 * dim), dtype=np.float64)
    fm_arr = np.empty(8 * max(nfm, 1), dtype=np.float64)
    cell_arr = np.empty(32 * max(n_cells, 1), dtype=np.float64)
    dtheta_arr = np.zeros(n_params, dtype=np.float64)
    dx_arr = np.zeros(n, dtype=np.float64)

    cdef double[::1] carrier = carrier_arr
    cdef double[::1] scratch = scratch_arr
    cdef double[::1] postfm = postfm_arr
    cdef double[:, ::1] cache = cache_arr
    cdef double[::1] fm_u = fm_arr
    cdef double[::1] cell_u = cell_arr
    cdef double[::1] dtheta = dtheta_arr
    cdef double[::1] dx = dx_arr

    cdef double ry_p[8]
    cdef double ry_m[8]
    cdef double ang[15]
    cdef double u_shift[32]

    cdef int row, slot, q, c, f, k15, si, base
    cdef double angle, freq, value, vp, vm, d
    with nogil:
        # Fuse cells and resolve feature-map angles once.
        c = 0
        for row in range(n_rows):
            if kind[row] == OP_FM:
                slot = pp[row]
                q = qa[row]
                freq = th[slot] if slot >= 0 else 1.0
                angle = freq * xv[q]
                _rot2(ROT_RY, angle, &fm_u[8 * row])
            elif kind[row] == OP_CELL:
                _build_cell(&th[pp[row]], &cell_u[32 * c])
                c += 1

        # Forward pass, caching the state in front of every cell and
        # right after the feature map.
        c = 0
        if nfm == 0:
            memcpy(&postfm[0], &carrier[0], nbytes)
        for row in range(n_rows):
            if kind[row] == OP_CELL:
                memcpy(&cache[cidx[row], 0], &carrier[0], nbytes)
                _apply_2q(&carrier[0], n, qa[row], qb[row], &cell_u[32 * cidx[row]])
            elif kind[row] == OP_CZ:
                _apply_cz(&carrier[0], n, qa[row], qb[row])
            elif kind[row] == OP_CX:
                _apply_cx(&carrier[0], n, qa[row], qb[row])
            else:
                _apply_1q(&carrier[0], n, qa[row], &fm_u[8 * row])
                if row == nfm - 1:
                    memcpy(&postfm[0], &carrier[0], nbytes)
        value = _measure(&carrier[0], &wz[0], dim)

        # Feature-map branches: a same-axis rotation composes
        # additively, so shifting means one extra quarter turn applied
        # to the post-feature-map state.
        _rot2(ROT_RY, 0.5 * M_PI, ry_p)
        _rot2(ROT_RY, -0.5 * M_PI, ry_m)
        for f in range(nfm):
            q = qa[f]
            slot = pp[f]
            memcpy(&scratch[0], &postfm[0], nbytes)
            _apply_1q(&scratch[0], n, q, ry_p)
            _walk(&scratch[0], nfm, n_rows, &kind[0], &qa[0], &qb[0], &cidx[0], &fm_u[0], &cell_u[0], n)
            vp = _measure(&scratch[0], &wz[0], dim)
            memcpy(&scratch[0], &postfm[0], nbytes)
            _apply_1q(&scratch[0], n, q, ry_m)
            _walk(&scratch[0], nfm, n_rows, &kind[0], &qa[0], &qb[0], &cidx[0], &fm_u[0], &cell_u[0], n)
            vm = _measure(&scratch[0], &wz[0], dim)
            d = 0.5 * (vp - vm)
            freq = th[slot] if slot >= 0 else 1.0
            dx[q] += freq * d
            if slot >= 0:
                dtheta[slot] += xv[q] * d

        # Cell branches: replay from the cached prefix with one slot
        # angle shifted, then ride the suffix to the end.
        for row in range(n_rows):
            if kind[row] != OP_CELL:
                continue
            base = pp[row]
            for k15 in range(15):
                vp = 0.0
                for si in range(2):
                    for c in range(15):
                        ang[c] = th[base + c]
                    ang[k15] += 0.5 * M_PI if si == 0 else -0.5 * M_PI
                    _build_cell(ang, u_shift)
                    memcpy(&scratch[0], &cache[cidx[row], 0], nbytes)
                    _apply_2q(&scratch[0], n, qa[row], qb[row], u_shift)
                    _walk(&scratch[0], row + 1, n_rows, &kind[0], &qa[0], &qb[0], &cidx[0], &fm_u[0], &cell_u[0], n)
                    if si == 0:
                        vp = _measure(&scratch[0], &wz[0], dim)
                    else:
                        vm = _measure(&scratch[0], &wz[0], dim)
                        dtheta[base + k15] += 0.5 * (vp - vm)

    return float(value), dtheta_arr, dx_arr
