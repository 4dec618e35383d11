# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled dense-net kernels.

Same contract as the numpy backend in ``_numpy.py``: row-major float64
arrays, weights (fan_in, fan_out). Matrix products go through BLAS dgemm;
bias add, activations and their derivatives are fused into single C loops
so a whole layer costs one BLAS call plus one sweep.

dgemm is a column-major routine. A row-major matrix viewed column-major
is its transpose, so every product below is issued on the swapped/flagged
operands; the identities are checked against numpy by the parity tests.
"""

from libc.math cimport exp, isfinite, sqrt, tanh

import numpy as np

from scipy.linalg.cython_blas cimport dgemm

HIDDEN_RELU = 0
HIDDEN_TANH = 1
OUT_IDENTITY = 0
OUT_TANH = 1
OUT_SIGMOID = 2

BACKEND_NAME = "compiled"


cdef void _gemm_nn(double* a, double* b, double* c, int m, int n, int k) noexcept nogil:
    # c(m,n) = a(m,k) @ b(k,n), all row-major
    cdef int mm = n, nn = m, kk = k
    cdef double one = 1.0, zero = 0.0
    dgemm("N", "N", &mm, &nn, &kk, &one, b, &mm, a, &kk, &zero, c, &mm)


cdef void _gemm_tn(double* a, double* b, double* c, int m, int n, int k) noexcept nogil:
    # c(m,n) = a(k,m)^T @ b(k,n), all row-major
    cdef int mm = n, nn = m, kk = k
    cdef double one = 1.0, zero = 0.0
    dgemm("N", "T", &mm, &nn, &kk, &one, b, &mm, a, &nn, &zero, c, &mm)


cdef void _gemm_nt(double* a, double* b, double* c, int m, int n, int k) noexcept nogil:
    # c(m,n) = a(m,k) @ b(n,k)^T, all row-major
    cdef int mm = n, nn = m, kk = k
    cdef double one = 1.0, zero = 0.0
    dgemm("T", "N", &mm, &nn, &kk, &one, b, &kk, a, &kk, &zero, c, &mm)


cdef inline double _sigmoid(double z) noexcept nogil:
    cdef double e
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


cdef void _bias_act(double* z, double* b, int rows, int cols, int act) noexcept nogil:
    # z += b (broadcast over rows), then activation. act: 0 none, 1 relu,
    # 2 tanh, 3 sigmoid.
    cdef Py_ssize_t i, j
    cdef double v
    for i in range(rows):
        for j in range(cols):
            v = z[i * cols + j] + b[j]
            if act == 1:
                v = v if v > 0.0 else 0.0
            elif act == 2:
                v = tanh(v)
            elif act == 3:
                v = _sigmoid(v)
            z[i * cols + j] = v


cdef void _act_grad(double* g, double* a, Py_ssize_t size, int act) noexcept nogil:
    # g *= act'(z) expressed through the post-activation a
    cdef Py_ssize_t i
    cdef double av
    if act == 1:
        for i in range(size):
            if a[i] <= 0.0:
                g[i] = 0.0
    elif act == 2:
        for i in range(size):
            av = a[i]
            g[i] *= 1.0 - av * av
    elif act == 3:
        for i in range(size):
            av = a[i]
            g[i] *= av * (1.0 - av)


cdef void _colsum(double* g, double* out, int rows, int cols) noexcept nogil:
    cdef Py_ssize_t i, j
    for j in range(cols):
        out[j] = 0.0
    for i in range(rows):
        for j in range(cols):
            out[j] += g[i * cols + j]


cdef int _out_code(int out_act) noexcept nogil:
    if out_act == 1:
        return 2  # tanh
    if out_act == 2:
        return 3  # sigmoid
    return 0


def mlp_forward(X, Ws, bs, int hidden_act, int out_act, bint want_cache=False):
    cdef int n_layers = len(Ws)
    cdef double[:, ::1] A = X
    cdef double[:, ::1] W, Z
    cdef double[::1] b
    cdef int B = A.shape[0]
    cdef int n_in, n_out, act, l
    cache = [] if want_cache else None
    out = None
    for l in range(n_layers):
        W = Ws[l]
        b = bs[l]
        n_in = W.shape[0]
        n_out = W.shape[1]
        out = np.empty((B, n_out), dtype=np.float64)
        Z = out
        if l < n_layers - 1:
            act = 1 if hidden_act == HIDDEN_RELU else 2
        else:
            act = _out_code(out_act)
        with nogil:
            _gemm_nn(&A[0, 0], &W[0, 0], &Z[0, 0], B, n_out, n_in)
            _bias_act(&Z[0, 0], &b[0], B, n_out, act)
        if want_cache:
            cache.append(out)
        A = Z
    if want_cache:
        return out, cache
    return out


def mlp_backward(X, Ws, bs, int hidden_act, int out_act, cache, GY,
                 out_dws=None, out_dbs=None):
    cdef int n_layers = len(Ws)
    cdef double[:, ::1] Xv = X
    cdef double[:, ::1] G, Gprev, W, Aprev, dW
    cdef double[::1] db
    cdef int B = Xv.shape[0]
    cdef int n_in, n_out, l, hact

    hact = 1 if hidden_act == HIDDEN_RELU else 2
    g_arr = np.array(GY, dtype=np.float64, copy=True, order="C")
    G = g_arr
    Y = cache[n_layers - 1]
    cdef double[:, ::1] Yv = Y
    cdef int ocode = _out_code(out_act)
    if ocode != 0:
        with nogil:
            _act_grad(&G[0, 0], &Yv[0, 0], <Py_ssize_t> B * G.shape[1], ocode)

    dWs = [None] * n_layers if out_dws is None else out_dws
    dbs = [None] * n_layers if out_dbs is None else out_dbs
    for l in range(n_layers - 1, -1, -1):
        W = Ws[l]
        n_in = W.shape[0]
        n_out = W.shape[1]
        a_prev = X if l == 0 else cache[l - 1]
        Aprev = a_prev
        dw_arr = dWs[l] if out_dws is not None else np.empty(
            (n_in, n_out), dtype=np.float64)
        db_arr = dbs[l] if out_dbs is not None else np.empty(
            n_out, dtype=np.float64)
        gprev_arr = np.empty((B, n_in), dtype=np.float64)
        dW = dw_arr
        db = db_arr
        Gprev = gprev_arr
        with nogil:
            _gemm_tn(&Aprev[0, 0], &G[0, 0], &dW[0, 0], n_in, n_out, B)
            _colsum(&G[0, 0], &db[0], B, n_out)
            _gemm_nt(&G[0, 0], &W[0, 0], &Gprev[0, 0], B, n_in, n_out)
            if l > 0:
                _act_grad(&Gprev[0, 0], &Aprev[0, 0], <Py_ssize_t> B * n_in, hact)
        dWs[l] = dw_arr
        dbs[l] = db_arr
        g_arr = gprev_arr
        G = Gprev
    return dWs, dbs, g_arr


def mlp_input_grad(X, Ws, bs, int hidden_act, int out_act, cache, GY):
    # Input gradient only: same recursion as mlp_backward minus the dW/db
    # products, for callers that differentiate through a frozen net.
    cdef int n_layers = len(Ws)
    cdef double[:, ::1] Xv = X
    cdef double[:, ::1] G, Gprev, W, Aprev
    cdef int B = Xv.shape[0]
    cdef int n_in, n_out, l, hact

    hact = 1 if hidden_act == HIDDEN_RELU else 2
    g_arr = np.array(GY, dtype=np.float64, copy=True, order="C")
    G = g_arr
    Y = cache[n_layers - 1]
    cdef double[:, ::1] Yv = Y
    cdef int ocode = _out_code(out_act)
    if ocode != 0:
        with nogil:
            _act_grad(&G[0, 0], &Yv[0, 0], <Py_ssize_t> B * G.shape[1], ocode)

    for l in range(n_layers - 1, -1, -1):
        W = Ws[l]
        n_in = W.shape[0]
        n_out = W.shape[1]
        gprev_arr = np.empty((B, n_in), dtype=np.float64)
        Gprev = gprev_arr
        if l > 0:
            Aprev = cache[l - 1]
            with nogil:
                _gemm_nt(&G[0, 0], &W[0, 0], &Gprev[0, 0], B, n_in, n_out)
                _act_grad(&Gprev[0, 0], &Aprev[0, 0],
                          <Py_ssize_t> B * n_in, hact)
        else:
            with nogil:
                _gemm_nt(&G[0, 0], &W[0, 0], &Gprev[0, 0], B, n_in, n_out)
        g_arr = gprev_arr
        G = Gprev
    return g_arr


def adam_step(params, grads, ms, vs, int t, double lr, double beta1,
              double beta2, double eps):
    # Returns 0 after updating in place; returns 1 and touches nothing when
    # any gradient entry is non-finite (callers turn that into an error).
    cdef double c1 = 1.0 - beta1 ** t
    cdef double c2 = 1.0 - beta2 ** t
    cdef double[::1] p, g, m, v
    cdef Py_ssize_t i, n, idx
    cdef double mh, vh
    cdef int bad = 0
    for idx in range(len(grads)):
        g = grads[idx].ravel()
        n = g.shape[0]
        with nogil:
            for i in range(n):
                if not isfinite(g[i]):
                    bad = 1
                    break
        if bad:
            return 1
    for idx in range(len(params)):
        p = params[idx].ravel()
        g = grads[idx].ravel()
        m = ms[idx].ravel()
        v = vs[idx].ravel()
        n = p.shape[0]
        with nogil:
            for i in range(n):
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i]
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i]
                mh = m[i] / c1
                vh = v[i] / c2
                p[i] -= lr * mh / (sqrt(vh) + eps)
    return 0


def polyak_mix(targets, sources, double rate):
    cdef double[::1] tgt, src
    cdef Py_ssize_t i, n, idx
    for idx in range(len(targets)):
        tgt = targets[idx].ravel()
        src = sources[idx].ravel()
        n = tgt.shape[0]
        with nogil:
            for i in range(n):
                tgt[i] = (1.0 - rate) * tgt[i] + rate * src[i]


def adam_flat(double[::1] p, double[::1] g, double[::1] m, double[::1] v,
              int t, double lr, double beta1, double beta2, double eps):
    # adam_step on flat parameter vectors: one buffer per role, one pass,
    # elementwise identical to the per-layer form
    cdef double c1 = 1.0 - beta1 ** t
    cdef double c2 = 1.0 - beta2 ** t
    cdef Py_ssize_t i, n = p.shape[0]
    cdef double mh, vh
    cdef int ok = 1
    with nogil:
        for i in range(n):
            ok &= isfinite(g[i]) != 0
        if ok:
            for i in range(n):
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i]
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i]
                mh = m[i] / c1
                vh = v[i] / c2
                p[i] -= lr * mh / (sqrt(vh) + eps)
    return 0 if ok else 1


def polyak_flat(double[::1] target, double[::1] source, double rate):
    cdef Py_ssize_t i, n = target.shape[0]
    with nogil:
        for i in range(n):
            target[i] = (1.0 - rate) * target[i] + rate * source[i]


cdef enum:
    MAXL = 10


cdef int _net_layout(object sizes, int* ns, Py_ssize_t* woff,
                     Py_ssize_t* boff) except -1:
    # widths and flat-vector offsets of each layer's W and b
    cdef int nl = len(sizes) - 1
    cdef int l
    cdef Py_ssize_t off = 0
    if nl < 1 or nl > MAXL:
        raise ValueError(f"net must have 1..{MAXL} layers, got {nl}")
    for l in range(nl + 1):
        ns[l] = sizes[l]
        if ns[l] < 1:
            raise ValueError(f"layer widths must be positive, got {sizes}")
    for l in range(nl):
        woff[l] = off
        off += <Py_ssize_t> ns[l] * ns[l + 1]
        boff[l] = off
        off += ns[l + 1]
    return nl


def critic_mse_step(double[::1] theta, sizes, int hidden_act, int out_act,
                    double[:, ::1] X, double[::1] y, double[::1] gflat):
    """Fused value-regression step; see the numpy backend for semantics.

    One entry into C for the whole forward/residual/backward chain: the
    per-layer products still go through dgemm, but every intermediate
    lives in preallocated scratch and the flat gradient vector, so a
    step costs no per-layer Python glue.
    """
    cdef int ns[MAXL + 1]
    cdef Py_ssize_t woff[MAXL]
    cdef Py_ssize_t boff[MAXL]
    cdef int nl = _net_layout(sizes, ns, woff, boff)
    cdef int B = X.shape[0]
    cdef Py_ssize_t total = boff[nl - 1] + ns[nl]
    if ns[nl] != 1:
        raise ValueError(f"output width must be 1, got {ns[nl]}")
    if X.shape[1] != ns[0]:
        raise ValueError(
            f"X must have {ns[0]} columns, got {X.shape[1]}")
    if y.shape[0] != B:
        raise ValueError(f"y must have length {B}, got {y.shape[0]}")
    if theta.shape[0] != total or gflat.shape[0] != total:
        raise ValueError("parameter/gradient length does not match sizes")

    cdef double* cptr[MAXL]
    cdef double* gptr[MAXL]
    cdef double[:, ::1] tmp
    cdef double[::1] dv
    cdef int l
    caches = []
    gbufs = []
    for l in range(nl):
        arr = np.empty((B, ns[l + 1]), dtype=np.float64)
        caches.append(arr)
        tmp = arr
        cptr[l] = &tmp[0, 0]
        # gbufs[l] carries the gradient w.r.t. layer l's output
        garr = np.empty((B, ns[l + 1]), dtype=np.float64)
        gbufs.append(garr)
        tmp = garr
        gptr[l] = &tmp[0, 0]
    diff_arr = np.empty(B, dtype=np.float64)
    dv = diff_arr

    cdef double* th = &theta[0]
    cdef double* gf = &gflat[0]
    cdef double* A
    cdef double s = 2.0 / B
    cdef Py_ssize_t i
    cdef int hact = 1 if hidden_act == HIDDEN_RELU else 2
    cdef int ocode = _out_code(out_act)
    with nogil:
        A = &X[0, 0]
        for l in range(nl):
            _gemm_nn(A, th + woff[l], cptr[l], B, ns[l + 1], ns[l])
            _bias_act(cptr[l], th + boff[l], B, ns[l + 1],
                      hact if l < nl - 1 else ocode)
            A = cptr[l]
        for i in range(B):
            dv[i] = cptr[nl - 1][i] - y[i]
            gptr[nl - 1][i] = s * dv[i]
        if ocode != 0:
            _act_grad(gptr[nl - 1], cptr[nl - 1], <Py_ssize_t> B, ocode)
        for l in range(nl - 1, -1, -1):
            A = (&X[0, 0]) if l == 0 else cptr[l - 1]
            _gemm_tn(A, gptr[l], gf + woff[l], ns[l], ns[l + 1], B)
            _colsum(gptr[l], gf + boff[l], B, ns[l + 1])
            if l > 0:
                _gemm_nt(gptr[l], th + woff[l], gptr[l - 1],
                         B, ns[l], ns[l + 1])
                _act_grad(gptr[l - 1], A, <Py_ssize_t> B * ns[l], hact)
    return diff_arr


def actor_critic_ascent(double[::1] atheta, asizes, int ahidden, int aout,
                        double[::1] ctheta, csizes, int chidden, int cout,
                        double[:, ::1] obs, double[:, ::1] glob,
                        double[:, ::1] act_flat, int agent_index,
                        int act_dim, double[::1] gflat):
    """Fused policy-gradient step; see the numpy backend for semantics."""
    cdef int ans[MAXL + 1]
    cdef int cns[MAXL + 1]
    cdef Py_ssize_t awoff[MAXL]
    cdef Py_ssize_t aboff[MAXL]
    cdef Py_ssize_t cwoff[MAXL]
    cdef Py_ssize_t cboff[MAXL]
    cdef int anl = _net_layout(asizes, ans, awoff, aboff)
    cdef int cnl = _net_layout(csizes, cns, cwoff, cboff)
    cdef int B = obs.shape[0]
    cdef int g_dim = glob.shape[1]
    cdef int j_dim = act_flat.shape[1]
    cdef Py_ssize_t atot = aboff[anl - 1] + ans[anl]
    cdef Py_ssize_t ctot = cboff[cnl - 1] + cns[cnl]
    if ans[anl] != act_dim:
        raise ValueError(
            f"actor output width must be {act_dim}, got {ans[anl]}")
    if cns[cnl] != 1:
        raise ValueError(f"critic output width must be 1, got {cns[cnl]}")
    if cns[0] != g_dim + j_dim:
        raise ValueError(
            f"critic input width {cns[0]} != {g_dim} + {j_dim}")
    if obs.shape[1] != ans[0]:
        raise ValueError(
            f"obs must have {ans[0]} columns, got {obs.shape[1]}")
    if glob.shape[0] != B or act_flat.shape[0] != B:
        raise ValueError("obs, glob and act_flat must share batch size")
    if agent_index < 0 or (agent_index + 1) * act_dim > j_dim:
        raise ValueError(
            f"agent_index {agent_index} out of range for width {j_dim}")
    if atheta.shape[0] != atot or gflat.shape[0] != atot:
        raise ValueError("actor parameter/gradient length mismatch")
    if ctheta.shape[0] != ctot:
        raise ValueError("critic parameter length mismatch")

    cdef double* aptr[MAXL]
    cdef double* cptr[MAXL]
    cdef double* agp[MAXL + 1]
    cdef double* cgp[MAXL + 1]
    cdef double[:, ::1] tmp
    cdef int l
    acaches = []
    ccaches = []
    agbufs = []
    cgbufs = []
    for l in range(anl):
        arr = np.empty((B, ans[l + 1]), dtype=np.float64)
        acaches.append(arr)
        tmp = arr
        aptr[l] = &tmp[0, 0]
    for l in range(cnl):
        arr = np.empty((B, cns[l + 1]), dtype=np.float64)
        ccaches.append(arr)
        tmp = arr
        cptr[l] = &tmp[0, 0]
    # agp[k]/cgp[k] carry gradients w.r.t. the width-ns[k] activations;
    # the critic chain runs all the way to k=0 (its input), the actor
    # chain stops at k=1 since d/d(obs) is never consumed
    for l in range(1, anl + 1):
        arr = np.empty((B, ans[l]), dtype=np.float64)
        agbufs.append(arr)
        tmp = arr
        agp[l] = &tmp[0, 0]
    for l in range(cnl + 1):
        arr = np.empty((B, cns[l]), dtype=np.float64)
        cgbufs.append(arr)
        tmp = arr
        cgp[l] = &tmp[0, 0]
    cin_arr = np.empty((B, cns[0]), dtype=np.float64)
    tmp = cin_arr
    cdef double* cinp = &tmp[0, 0]

    cdef double* ath = &atheta[0]
    cdef double* cth = &ctheta[0]
    cdef double* gf = &gflat[0]
    cdef double* A
    cdef double inv_b = 1.0 / B
    cdef Py_ssize_t i, j, lo = <Py_ssize_t> agent_index * act_dim
    cdef int a_hact = 1 if ahidden == HIDDEN_RELU else 2
    cdef int c_hact = 1 if chidden == HIDDEN_RELU else 2
    cdef int a_ocode = _out_code(aout)
    cdef int c_ocode = _out_code(cout)
    with nogil:
        # actor forward
        A = &obs[0, 0]
        for l in range(anl):
            _gemm_nn(A, ath + awoff[l], aptr[l], B, ans[l + 1], ans[l])
            _bias_act(aptr[l], ath + aboff[l], B, ans[l + 1],
                      a_hact if l < anl - 1 else a_ocode)
            A = aptr[l]
        # splice the live action into the caller's joint-action block and
        # assemble the critic input rows [glob | joint actions]
        for i in range(B):
            for j in range(act_dim):
                act_flat[i, lo + j] = aptr[anl - 1][i * act_dim + j]
            for j in range(g_dim):
                cinp[i * cns[0] + j] = glob[i, j]
            for j in range(j_dim):
                cinp[i * cns[0] + g_dim + j] = act_flat[i, j]
        # critic forward
        A = cinp
        for l in range(cnl):
            _gemm_nn(A, cth + cwoff[l], cptr[l], B, cns[l + 1], cns[l])
            _bias_act(cptr[l], cth + cboff[l], B, cns[l + 1],
                      c_hact if l < cnl - 1 else c_ocode)
            A = cptr[l]
        # mean-value gradient back to the critic's input columns
        for i in range(B):
            cgp[cnl][i] = inv_b
        if c_ocode != 0:
            _act_grad(cgp[cnl], cptr[cnl - 1], <Py_ssize_t> B, c_ocode)
        for l in range(cnl - 1, -1, -1):
            _gemm_nt(cgp[l + 1], cth + cwoff[l], cgp[l],
                     B, cns[l], cns[l + 1])
            if l > 0:
                _act_grad(cgp[l], cptr[l - 1],
                          <Py_ssize_t> B * cns[l], c_hact)
        # this agent's action columns feed the actor's output gradient
        for i in range(B):
            for j in range(act_dim):
                agp[anl][i * act_dim + j] = \
                    cgp[0][i * cns[0] + g_dim + lo + j]
        if a_ocode != 0:
            _act_grad(agp[anl], aptr[anl - 1],
                      <Py_ssize_t> B * act_dim, a_ocode)
        # actor backward, gradients straight into gflat
        for l in range(anl - 1, -1, -1):
            A = (&obs[0, 0]) if l == 0 else aptr[l - 1]
            _gemm_tn(A, agp[l + 1], gf + awoff[l], ans[l], ans[l + 1], B)
            _colsum(agp[l + 1], gf + aboff[l], B, ans[l + 1])
            if l > 0:
                _gemm_nt(agp[l + 1], ath + awoff[l], agp[l],
                         B, ans[l], ans[l + 1])
                _act_grad(agp[l], A, <Py_ssize_t> B * ans[l], a_hact)
    return ccaches[cnl - 1]
