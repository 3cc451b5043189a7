"""Compiled barrier kernels for the (D, r) subproblem.

The problem arrives flattened: a list of log-det terms
``log|const_j + D[idx_j, idx_j]|``, each tagged with a role (objective,
distortion block of a rate constraint, or covariance block of an exact rate
constraint), plus the linear pieces. Matrices are tiny, so everything is
written as plain loops with a hand-rolled Cholesky that reports failure
instead of raising.
"""
from __future__ import annotations

import numpy as np
from numba import njit

LN2 = np.log(2.0)

OBJ, DRATE, XRATE = 0, 1, 2


@njit(cache=True)
def build_d(theta, n, jj, ll):
    q = jj.size
    D = np.zeros((n, n), dtype=np.complex128)
    for i in range(n):
        D[i, i] = theta[i]
    for e in range(q):
        z = theta[n + e] + 1j * theta[n + q + e]
        D[jj[e], ll[e]] = z
        D[ll[e], jj[e]] = np.conj(z)
    return D


@njit(cache=True)
def _chol(X, m):
    L = np.zeros((m, m), dtype=np.complex128)
    for j in range(m):
        s = X[j, j].real
        for k in range(j):
            s -= (L[j, k] * np.conj(L[j, k])).real
        if not s > 0.0:
            return L, False
        d = np.sqrt(s)
        L[j, j] = d
        for i in range(j + 1, m):
            acc = X[i, j]
            for k in range(j):
                acc -= L[i, k] * np.conj(L[j, k])
            L[i, j] = acc / d
    return L, True


@njit(cache=True)
def _inv_from_chol(L, m):
    # inverse of L, then G = L^-H L^-1
    Li = np.zeros((m, m), dtype=np.complex128)
    for j in range(m):
        Li[j, j] = 1.0 / L[j, j]
        for i in range(j + 1, m):
            acc = 0j
            for k in range(j, i):
                acc -= L[i, k] * Li[k, j]
            Li[i, j] = acc / L[i, i]
    G = np.zeros((m, m), dtype=np.complex128)
    for i in range(m):
        for j in range(m):
            acc = 0j
            for k in range(max(i, j), m):
                acc += np.conj(Li[k, i]) * Li[k, j]
            G[i, j] = acc
    return G


@njit(cache=True)
def _term_matrix(D, k, t_n, t_idx, t_const):
    m = t_n[k]
    X = np.empty((m, m), dtype=np.complex128)
    for i in range(m):
        for j in range(m):
            X[i, j] = t_const[k, i, j] + D[t_idx[k, i], t_idx[k, j]]
    return X


@njit(cache=True)
def evaluate(theta, r, n, jj, ll, t_n, t_idx, t_const, t_kind, t_w, t_s,
             gB, obj_const, gA, constA, members, alpha0, cf):
    """(ok, surrogate objective in bits/s/Hz, rate slacks)."""
    D = build_d(theta, n, jj, ll)
    nS = constA.size
    R = constA + gA @ theta
    obj = obj_const - gB @ theta
    for k in range(t_n.size):
        X = _term_matrix(D, k, t_n, t_idx, t_const)
        L, ok = _chol(X, t_n[k])
        if not ok:
            return False, 0.0, np.zeros(nS)
        ld = 0.0
        for i in range(t_n[k]):
            ld += 2.0 * np.log(L[i, i].real)
        if t_kind[k] == OBJ:
            obj += t_w[k] * ld
        elif t_kind[k] == DRATE:
            R[t_s[k]] -= ld
        else:
            R[t_s[k]] += ld
    s = members @ r - (alpha0 * cf / LN2) * R
    return True, alpha0 * obj / LN2, s


@njit(cache=True)
def barrier_value(z, t, p, n, jj, ll, t_n, t_idx, t_const, t_kind, t_w, t_s,
                  gB, obj_const, gA, constA, members, alpha0, cf, A_rows, b_rows):
    r = z[p:]
    u = b_rows - A_rows @ r
    for i in range(u.size):
        if not u[i] > 0.0:
            return np.inf
    ok, obj, s = evaluate(z[:p], r, n, jj, ll, t_n, t_idx, t_const, t_kind, t_w, t_s,
                          gB, obj_const, gA, constA, members, alpha0, cf)
    if not ok:
        return np.inf
    val = -t * obj
    for i in range(s.size):
        if not s[i] > 0.0:
            return np.inf
        val -= np.log(s[i])
    for i in range(u.size):
        val -= np.log(u[i])
    return val


@njit(cache=True)
def barrier_derivatives(z, t, p, n, jj, ll, t_n, t_idx, t_const, t_kind, t_w, t_s,
                        e_cnt, e_a, e_b, e_c, e_par,
                        gB, obj_const, gA, constA, members, alpha0, cf, A_rows, b_rows):
    """(ok, value, gradient, Newton matrix). The curvature of covariance
    log-dets in exact rate constraints (a concave contribution) is omitted so
    the Newton matrix stays positive definite."""
    nz = z.size
    theta = z[:p]
    r = z[p:]
    nS = constA.size
    g = np.zeros(nz)
    H = np.zeros((nz, nz))
    u = b_rows - A_rows @ r
    for i in range(u.size):
        if not u[i] > 0.0:
            return False, np.inf, g, H
    D = build_d(theta, n, jj, ll)
    kobj = t * alpha0 / LN2
    crate = alpha0 * cf / LN2
    R = constA + gA @ theta
    dR = gA.copy()
    hD = np.zeros((nS, p, p))
    obj = obj_const - gB @ theta
    for i in range(p):
        g[i] += kobj * gB[i]
    for k in range(t_n.size):
        m = t_n[k]
        X = _term_matrix(D, k, t_n, t_idx, t_const)
        L, ok = _chol(X, m)
        if not ok:
            return False, np.inf, g, H
        ld = 0.0
        for i in range(m):
            ld += 2.0 * np.log(L[i, i].real)
        G = _inv_from_chol(L, m)
        E = e_cnt[k]
        grad = np.zeros(p)
        for e in range(E):
            grad[e_par[k, e]] += (e_c[k, e] * G[e_b[k, e], e_a[k, e]]).real
        kind = t_kind[k]
        if kind == OBJ:
            w = t_w[k]
            obj += w * ld
            for i in range(p):
                g[i] -= kobj * w * grad[i]
        else:
            sgn = -1.0 if kind == DRATE else 1.0
            si = t_s[k]
            R[si] += sgn * ld
            for i in range(p):
                dR[si, i] += sgn * grad[i]
        if kind == XRATE:
            continue
        scale = kobj * t_w[k] if kind == OBJ else 1.0
        for e in range(E):
            pe = e_par[k, e]
            for f in range(E):
                pf = e_par[k, f]
                val = (e_c[k, e] * e_c[k, f] * G[e_b[k, f], e_a[k, e]]
                       * G[e_b[k, e], e_a[k, f]]).real
                if kind == OBJ:
                    H[pe, pf] += scale * val
                else:
                    hD[t_s[k], pe, pf] += val
    s = members @ r - crate * R
    F = -t * alpha0 * obj / LN2
    for i in range(nS):
        if not s[i] > 0.0:
            return False, np.inf, g, H
    ds = np.zeros(nz)
    for si in range(nS):
        for i in range(p):
            ds[i] = -crate * dR[si, i]
        for j in range(r.size):
            ds[p + j] = members[si, j]
        inv = 1.0 / s[si]
        F -= np.log(s[si])
        for i in range(nz):
            g[i] -= ds[i] * inv
            for j in range(nz):
                H[i, j] += ds[i] * ds[j] * inv * inv
        for i in range(p):
            for j in range(p):
                H[i, j] += crate * inv * hD[si, i, j]
    for i in range(u.size):
        inv = 1.0 / u[i]
        F -= np.log(u[i])
        for a in range(r.size):
            g[p + a] += A_rows[i, a] * inv
            for b in range(r.size):
                H[p + a, p + b] += A_rows[i, a] * A_rows[i, b] * inv * inv
    return True, F, g, H


@njit(cache=True)
def _solve_spd(H, g):
    """-H^-1 g by Cholesky, adding a growing ridge if H is not numerically PD."""
    m = g.size
    ridge = 0.0
    hmax = 0.0
    for i in range(m):
        hmax = max(hmax, abs(H[i, i]))
    for _ in range(30):
        L = np.zeros((m, m))
        ok = True
        for j in range(m):
            s = H[j, j] + ridge
            for k in range(j):
                s -= L[j, k] * L[j, k]
            if not s > 0.0:
                ok = False
                break
            d = np.sqrt(s)
            L[j, j] = d
            for i in range(j + 1, m):
                acc = H[i, j]
                for k in range(j):
                    acc -= L[i, k] * L[j, k]
                L[i, j] = acc / d
        if ok:
            y = np.zeros(m)
            for i in range(m):
                acc = -g[i]
                for k in range(i):
                    acc -= L[i, k] * y[k]
                y[i] = acc / L[i, i]
            x = np.zeros(m)
            for i in range(m - 1, -1, -1):
                acc = y[i]
                for k in range(i + 1, m):
                    acc -= L[k, i] * x[k]
                x[i] = acc / L[i, i]
            return x, True
        ridge = max(ridge * 10.0, 1e-12 * max(hmax, 1e-300))
    return np.zeros(m), False


@njit(cache=True)
def path_follow(z, t, mu, gap_tol, newton_tol, max_newton, n_constraints,
                p, n, jj, ll, t_n, t_idx, t_const, t_kind, t_w, t_s,
                e_cnt, e_a, e_b, e_c, e_par,
                gB, obj_const, gA, constA, members, alpha0, cf, A_rows, b_rows):
    """Barrier path following from a strictly feasible z.

    Returns (z, final weight, Newton steps, status) with status 0 on success,
    1 if an iterate left the domain, 2 if the Newton system failed.
    """
    steps = 0
    while True:
        for _ in range(max_newton):
            ok, F, g, H = barrier_derivatives(
                z, t, p, n, jj, ll, t_n, t_idx, t_const, t_kind, t_w, t_s,
                e_cnt, e_a, e_b, e_c, e_par,
                gB, obj_const, gA, constA, members, alpha0, cf, A_rows, b_rows)
            if not ok or not np.isfinite(F):
                return z, t, steps, 1
            dz, solved = _solve_spd(H, g)
            if not solved:
                return z, t, steps, 2
            slope = 0.0
            for i in range(z.size):
                slope += g[i] * dz[i]
            if -slope / 2.0 <= newton_tol:
                break
            # stay strictly inside the linear capacity rows
            step = 1.0
            r = z[p:]
            for i in range(b_rows.size):
                u = b_rows[i] - A_rows[i] @ r
                du = -(A_rows[i] @ dz[p:])
                if du < 0.0:
                    step = min(step, -0.99 * u / du)
            accepted = False
            while step > 1e-14:
                Fn = barrier_value(z + step * dz, t, p, n, jj, ll, t_n, t_idx, t_const,
                                   t_kind, t_w, t_s, gB, obj_const, gA, constA, members,
                                   alpha0, cf, A_rows, b_rows)
                if Fn <= F + 0.25 * step * slope:
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                break
            z = z + step * dz
            steps += 1
        if n_constraints / t < gap_tol or t > 1e15:
            return z, t, steps, 0
        t *= mu
