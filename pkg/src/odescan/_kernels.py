"""Compiled inner loops shared by the solver modules.

Everything here is numba-jitted and operates on plain float64 arrays so the
hot paths (residual evaluation, Newton-step element construction, the
associative scan, sequential stepping) run without the interpreter and can
fan out over threads with ``prange``. Functions with callable parameters
receive numba dispatchers (the compiled right-hand sides from the problems
module), which makes numba specialize the kernel per problem.

The public modules wrap these kernels with validated, documented interfaces;
nothing in here is part of the package API.
"""

import numpy as np
from numba import njit, prange

# Elements processed per prange task. Small enough to load-balance, large
# enough that the per-task scratch allocations are amortized.
_CHUNK = 128

_PIVOT_FLOOR = 1e-300


# ---------------------------------------------------------------------------
# Tiny dense LU with partial pivoting.
# ---------------------------------------------------------------------------

@njit(cache=True)
def lu_factor_inplace(A, piv):
    """Factor A in place (doolittle, partial pivoting).

    Returns -1 on success, otherwise the index of the first pivot whose
    magnitude fell below the working-precision floor.
    """
    n = A.shape[0]
    for k in range(n):
        p = k
        best = abs(A[k, k])
        for i in range(k + 1, n):
            v = abs(A[i, k])
            if v > best:
                best = v
                p = i
        if best < _PIVOT_FLOOR:
            return k
        piv[k] = p
        if p != k:
            for j in range(n):
                tmp = A[k, j]
                A[k, j] = A[p, j]
                A[p, j] = tmp
        inv = 1.0 / A[k, k]
        for i in range(k + 1, n):
            m = A[i, k] * inv
            A[i, k] = m
            for j in range(k + 1, n):
                A[i, j] -= m * A[k, j]
    return -1


@njit(cache=True)
def lu_solve_inplace(A, piv, x):
    """Solve with a factored matrix; x is overwritten by the solution."""
    n = A.shape[0]
    for k in range(n):
        p = piv[k]
        if p != k:
            tmp = x[k]
            x[k] = x[p]
            x[p] = tmp
        for i in range(k + 1, n):
            x[i] -= A[i, k] * x[k]
    for i in range(n - 1, -1, -1):
        acc = x[i]
        for j in range(i + 1, n):
            acc -= A[i, j] * x[j]
        x[i] = acc / A[i, i]


# ---------------------------------------------------------------------------
# Reductions and elementwise updates.
# ---------------------------------------------------------------------------

@njit(parallel=True, cache=True)
def max_abs(A):
    n, d = A.shape
    out = 0.0
    for i in prange(n):
        loc = 0.0
        for j in range(d):
            v = abs(A[i, j])
            if not v <= loc:
                loc = v
        out = max(out, loc)
    return out


@njit(parallel=True, cache=True)
def add_inplace(X, U):
    n, d = X.shape
    for i in prange(n):
        for j in range(d):
            X[i, j] += U[i, j]


# ---------------------------------------------------------------------------
# Inclusive scan over affine elements, array form.
#
# Element k is the map z -> F[k] @ z + c[k]. The combination of "earlier"
# element (Fe, ce) followed by "later" element (Fl, cl) is
# (Fl @ Fe, Fl @ ce + cl). The sweep below is the classic work-efficient
# up-sweep/down-sweep tree; the input is padded to a power of two with
# identity elements, which leaves the leading prefixes bit-for-bit unchanged.
# ---------------------------------------------------------------------------

@njit(parallel=True, cache=True)
def scan_affine(Fin, cin):
    n = cin.shape[0]
    d = cin.shape[1]
    m = 1
    while m < n:
        m <<= 1

    Fw = np.empty((m, d, d))
    cw = np.empty((m, d))
    for k in prange(m):
        if k < n:
            for r in range(d):
                for s in range(d):
                    Fw[k, r, s] = Fin[k, r, s]
                cw[k, r] = cin[k, r]
        else:
            for r in range(d):
                for s in range(d):
                    Fw[k, r, s] = 1.0 if r == s else 0.0
                cw[k, r] = 0.0

    # Up-sweep: node j accumulates the fold of the block it roots.
    step = 1
    while step < m:
        width = 2 * step
        npairs = m // width
        nch = (npairs + _CHUNK - 1) // _CHUNK
        for ci in prange(nch):
            tf = np.empty((d, d))
            tc = np.empty(d)
            lo = ci * _CHUNK
            hi = min(lo + _CHUNK, npairs)
            for i in range(lo, hi):
                j = (i + 1) * width - 1
                l = j - step
                # later = node j, earlier = node l
                for r in range(d):
                    acc = cw[j, r]
                    for q in range(d):
                        acc += Fw[j, r, q] * cw[l, q]
                    tc[r] = acc
                for r in range(d):
                    for s in range(d):
                        acc = 0.0
                        for q in range(d):
                            acc += Fw[j, r, q] * Fw[l, q, s]
                        tf[r, s] = acc
                for r in range(d):
                    cw[j, r] = tc[r]
                    for s in range(d):
                        Fw[j, r, s] = tf[r, s]
        step = width

    # Down-sweep: convert the tree into an exclusive scan.
    for r in range(d):
        for s in range(d):
            Fw[m - 1, r, s] = 1.0 if r == s else 0.0
        cw[m - 1, r] = 0.0
    step = m >> 1
    while step >= 1:
        width = 2 * step
        npairs = m // width
        nch = (npairs + _CHUNK - 1) // _CHUNK
        for ci in prange(nch):
            lf = np.empty((d, d))
            lc = np.empty(d)
            tf = np.empty((d, d))
            tc = np.empty(d)
            lo = ci * _CHUNK
            hi = min(lo + _CHUNK, npairs)
            for i in range(lo, hi):
                j = (i + 1) * width - 1
                l = j - step
                for r in range(d):
                    for s in range(d):
                        lf[r, s] = Fw[l, r, s]
                    lc[r] = cw[l, r]
                # left child inherits the prefix sitting at the node
                for r in range(d):
                    for s in range(d):
                        Fw[l, r, s] = Fw[j, r, s]
                    cw[l, r] = cw[j, r]
                # right child prefix: node prefix (earlier), then the old
                # left subtotal (later)
                for r in range(d):
                    acc = lc[r]
                    for q in range(d):
                        acc += lf[r, q] * cw[j, q]
                    tc[r] = acc
                for r in range(d):
                    for s in range(d):
                        acc = 0.0
                        for q in range(d):
                            acc += lf[r, q] * Fw[j, q, s]
                        tf[r, s] = acc
                for r in range(d):
                    cw[j, r] = tc[r]
                    for s in range(d):
                        Fw[j, r, s] = tf[r, s]
        step >>= 1

    # Fold each input element onto its exclusive prefix -> inclusive scan.
    Fp = np.empty((n, d, d))
    cp = np.empty((n, d))
    for k in prange(n):
        for r in range(d):
            acc = cin[k, r]
            for q in range(d):
                acc += Fin[k, r, q] * cw[k, q]
            cp[k, r] = acc
        for r in range(d):
            for s in range(d):
                acc = 0.0
                for q in range(d):
                    acc += Fin[k, r, q] * Fw[k, q, s]
                Fp[k, r, s] = acc
    return Fp, cp


# ---------------------------------------------------------------------------
# Explicit Runge-Kutta machinery. A tableau with one stage and b = [1]
# reproduces forward Euler, so a single set of kernels serves every explicit
# stepper in the package.
# ---------------------------------------------------------------------------

@njit(cache=False)
def _rk_increment(f_into, a, b, x, dt, kap, xs, g):
    """g <- dt * sum_i b_i kappa_i with the explicit stage recursion."""
    s = b.shape[0]
    d = x.shape[0]
    for i in range(s):
        for r in range(d):
            acc = x[r]
            for j in range(i):
                acc += dt * a[i, j] * kap[j, r]
            xs[r] = acc
        f_into(xs, kap[i])
    for r in range(d):
        acc = 0.0
        for i in range(s):
            acc += b[i] * kap[i, r]
        g[r] = dt * acc


@njit(cache=False)
def _rk_increment_with_jac(f_into, jac_into, a, b, x, dt, kap, dkap, xs, Js, M, g, Jg):
    """Increment plus its Jacobian, chain-ruled through the stages."""
    s = b.shape[0]
    d = x.shape[0]
    for i in range(s):
        for r in range(d):
            acc = x[r]
            for j in range(i):
                acc += dt * a[i, j] * kap[j, r]
            xs[r] = acc
        f_into(xs, kap[i])
        jac_into(xs, Js)
        for r in range(d):
            for cidx in range(d):
                m = 1.0 if r == cidx else 0.0
                for j in range(i):
                    m += dt * a[i, j] * dkap[j, r, cidx]
                M[r, cidx] = m
        for r in range(d):
            for cidx in range(d):
                acc = 0.0
                for q in range(d):
                    acc += Js[r, q] * M[q, cidx]
                dkap[i, r, cidx] = acc
    for r in range(d):
        acc = 0.0
        for i in range(s):
            acc += b[i] * kap[i, r]
        g[r] = dt * acc
    for r in range(d):
        for cidx in range(d):
            acc = 0.0
            for i in range(s):
                acc += b[i] * dkap[i, r, cidx]
            Jg[r, cidx] = dt * acc


@njit(parallel=True, cache=False)
def build_explicit(f_into, jac_into, a, b, x0, X, dt, Fe, ce, h):
    """Residual blocks and Newton-step scan elements, explicit path.

    For block k (0-based): h[k] = X[k] - prev - g(prev), with prev = x0 for
    k = 0 and X[k-1] otherwise. The scan element is (I + dg/dx at prev, -h[k])
    except the first, whose matrix part is zero so the scanned offsets are
    the Newton-step blocks themselves.
    """
    n, d = X.shape
    s = b.shape[0]
    nch = (n + _CHUNK - 1) // _CHUNK
    for ci in prange(nch):
        kap = np.empty((s, d))
        dkap = np.empty((s, d, d))
        xs = np.empty(d)
        Js = np.empty((d, d))
        M = np.empty((d, d))
        g = np.empty(d)
        Jg = np.empty((d, d))
        prev = np.empty(d)
        lo = ci * _CHUNK
        hi = min(lo + _CHUNK, n)
        for k in range(lo, hi):
            if k == 0:
                for r in range(d):
                    prev[r] = x0[r]
            else:
                for r in range(d):
                    prev[r] = X[k - 1, r]
            _rk_increment_with_jac(f_into, jac_into, a, b, prev, dt,
                                   kap, dkap, xs, Js, M, g, Jg)
            for r in range(d):
                hv = X[k, r] - prev[r] - g[r]
                h[k, r] = hv
                ce[k, r] = -hv
            if k == 0:
                for r in range(d):
                    for cidx in range(d):
                        Fe[k, r, cidx] = 0.0
            else:
                for r in range(d):
                    for cidx in range(d):
                        Fe[k, r, cidx] = Jg[r, cidx] + (1.0 if r == cidx else 0.0)


@njit(cache=False)
def seq_explicit(f_into, a, b, x0, dt, n, X):
    """Sequential explicit stepping; X[k] receives the state after k+1 steps."""
    d = x0.shape[0]
    s = b.shape[0]
    kap = np.empty((s, d))
    xs = np.empty(d)
    g = np.empty(d)
    x = np.empty(d)
    for r in range(d):
        x[r] = x0[r]
    for k in range(n):
        _rk_increment(f_into, a, b, x, dt, kap, xs, g)
        for r in range(d):
            x[r] = x[r] + g[r]
            X[k, r] = x[r]


@njit(parallel=True, cache=False)
def parareal_fine(f_into, a, b, nodes, dt, substeps, out):
    """Independent fine passes over the coarse intervals.

    nodes: (M, d) start states. out: (M, substeps, d) fine states. Each pass
    uses the same single-step routine as seq_explicit, so a pass started from
    an exact node reproduces the sequential reference bit-for-bit.
    """
    mcoarse, d = nodes.shape
    s = b.shape[0]
    for mi in prange(mcoarse):
        kap = np.empty((s, d))
        xs = np.empty(d)
        g = np.empty(d)
        x = np.empty(d)
        for r in range(d):
            x[r] = nodes[mi, r]
        for k in range(substeps):
            _rk_increment(f_into, a, b, x, dt, kap, xs, g)
            for r in range(d):
                x[r] = x[r] + g[r]
                out[mi, k, r] = x[r]


# ---------------------------------------------------------------------------
# Implicit one-step methods of the weighted form
#   g(x_prev, x_next, dt) = dt * (w_prev * f(x_prev) + w_next * f(x_next)),
# which covers backward Euler (0, 1) and the trapezoidal rule (1/2, 1/2).
# ---------------------------------------------------------------------------

@njit(parallel=True, cache=False)
def build_implicit(f_into, jac_into, w_prev, w_next, x0, X, dt, Fe, ce, h):
    """Residual blocks and scan elements for the implicit path.

    Element k carries F = A_k^{-1} (I + dg/dx_prev) and c = -A_k^{-1} h[k]
    with A_k = I - dg/dx_next evaluated at the current iterate; the first
    element's matrix part is zeroed as in the explicit case. Returns the
    index of the first block whose A_k is singular to working precision,
    or -1 if every block factors cleanly.
    """
    n, d = X.shape
    nch = (n + _CHUNK - 1) // _CHUNK
    bad = np.empty(nch, np.int64)
    for ci in prange(nch):
        fprev = np.empty(d)
        fnext = np.empty(d)
        Jp = np.empty((d, d))
        Jn = np.empty((d, d))
        A = np.empty((d, d))
        piv = np.empty(d, np.int64)
        col = np.empty(d)
        prev = np.empty(d)
        first_bad = -1
        lo = ci * _CHUNK
        hi = min(lo + _CHUNK, n)
        for k in range(lo, hi):
            if k == 0:
                for r in range(d):
                    prev[r] = x0[r]
            else:
                for r in range(d):
                    prev[r] = X[k - 1, r]
            f_into(prev, fprev)
            f_into(X[k], fnext)
            jac_into(prev, Jp)
            jac_into(X[k], Jn)
            for r in range(d):
                h[k, r] = X[k, r] - prev[r] - dt * (w_prev * fprev[r] + w_next * fnext[r])
            for r in range(d):
                for cidx in range(d):
                    A[r, cidx] = (1.0 if r == cidx else 0.0) - dt * w_next * Jn[r, cidx]
            stat = lu_factor_inplace(A, piv)
            if stat >= 0:
                if first_bad < 0:
                    first_bad = k
                for r in range(d):
                    ce[k, r] = 0.0
                    for cidx in range(d):
                        Fe[k, r, cidx] = 0.0
                continue
            for r in range(d):
                col[r] = -h[k, r]
            lu_solve_inplace(A, piv, col)
            for r in range(d):
                ce[k, r] = col[r]
            if k == 0:
                for r in range(d):
                    for cidx in range(d):
                        Fe[k, r, cidx] = 0.0
            else:
                for cidx in range(d):
                    for r in range(d):
                        col[r] = dt * w_prev * Jp[r, cidx] + (1.0 if r == cidx else 0.0)
                    lu_solve_inplace(A, piv, col)
                    for r in range(d):
                        Fe[k, r, cidx] = col[r]
        bad[ci] = first_bad
    worst = -1
    for ci in range(nch):
        if bad[ci] >= 0 and (worst < 0 or bad[ci] < worst):
            worst = bad[ci]
    return worst


@njit(cache=False)
def seq_implicit(f_into, jac_into, w_prev, w_next, x0, dt, n, tol, max_inner, X):
    """Sequential implicit stepping with a per-step Newton solve.

    Warm-starts each step at the previous state. Returns -1 on success,
    -(k+2) if the step-k linear system went singular, and k if the step-k
    Newton loop failed to reach tol.
    """
    d = x0.shape[0]
    xprev = np.empty(d)
    x = np.empty(d)
    fp = np.empty(d)
    fx = np.empty(d)
    J = np.empty((d, d))
    A = np.empty((d, d))
    piv = np.empty(d, np.int64)
    r = np.empty(d)
    for i in range(d):
        xprev[i] = x0[i]
    for k in range(n):
        f_into(xprev, fp)
        for i in range(d):
            x[i] = xprev[i]
        converged = False
        for _ in range(max_inner):
            f_into(x, fx)
            rn = 0.0
            for i in range(d):
                r[i] = x[i] - xprev[i] - dt * (w_prev * fp[i] + w_next * fx[i])
                av = abs(r[i])
                if av > rn:
                    rn = av
            if rn <= tol:
                converged = True
                break
            jac_into(x, J)
            for i in range(d):
                for j in range(d):
                    A[i, j] = (1.0 if i == j else 0.0) - dt * w_next * J[i, j]
            stat = lu_factor_inplace(A, piv)
            if stat >= 0:
                return -(k + 2)
            lu_solve_inplace(A, piv, r)
            for i in range(d):
                x[i] -= r[i]
        if not converged:
            # the last update was never checked; accept it if it closed the gap
            f_into(x, fx)
            rn = 0.0
            for i in range(d):
                rv = x[i] - xprev[i] - dt * (w_prev * fp[i] + w_next * fx[i])
                av = abs(rv)
                if av > rn:
                    rn = av
            if rn > tol:
                return k
        for i in range(d):
            X[k, i] = x[i]
            xprev[i] = x[i]
    return -1
