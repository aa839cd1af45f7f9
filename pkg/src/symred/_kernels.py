"""Compiled kernels for protected expression evaluation and constant tuning.

Trees are flat prefix-order arrays: ``codes[i]`` is the opcode of node ``i``
and ``values[i]`` carries the payload of constant nodes. Scanning the prefix
array right-to-left visits every child before its parent, so evaluation runs
on an operand stack; at an operator the first pop is the left operand.

Protected semantics (applied identically in every kernel):

* division by an exactly-zero denominator yields 0,
* ``log(x)`` is evaluated as ``log(|x| + 1e-12)``,
* the argument of ``exp`` is clipped to [-700, 700],
* every operator output is sanitised: NaN becomes 0 and the result is
  clamped to [-1e12, 1e12] (this subsumes the tan clamp).

Outputs are therefore always finite for finite inputs. Wherever a
protection rule or clamp fires, the derivative through that node is taken
as 0, which keeps the analytic constant-gradients consistent with finite
differences of the protected forward pass.
"""

from __future__ import annotations

import numpy as np
from numba import njit

ADD = 0
SUB = 1
MUL = 2
DIV = 3
SIN = 4
COS = 5
TAN = 6
EXP = 7
LOG = 8
CONST = 9
VAR0 = 10

N_BINARY = 4

CLAMP = 1.0e12
LOG_EPS = 1.0e-12
EXP_ARG_LIMIT = 700.0

CODE_DTYPE = np.int16


@njit(cache=True, inline="always")
def _guard(r):
    if r != r:  # NaN
        return 0.0
    if r > CLAMP:
        return CLAMP
    if r < -CLAMP:
        return -CLAMP
    return r


@njit(cache=True)
def subtree_end(codes, start):
    """Index one past the subtree rooted at ``start`` (prefix order)."""
    need = 1
    i = start
    while need > 0:
        c = codes[i]
        if c < N_BINARY:
            need += 1
        elif c >= CONST:
            need -= 1
        i += 1
    return i


@njit(cache=True)
def codes_depth(codes):
    """Tree depth of a prefix encoding; a lone terminal has depth 1."""
    m = codes.shape[0]
    stack = np.empty(m, np.int64)
    sp = 0
    deepest = 0
    for i in range(m):
        depth = sp + 1
        if depth > deepest:
            deepest = depth
        c = codes[i]
        if c < N_BINARY:
            stack[sp] = 2
            sp += 1
        elif c < CONST:
            stack[sp] = 1
            sp += 1
        else:
            while sp > 0 and stack[sp - 1] == 1:
                sp -= 1
            if sp > 0:
                stack[sp - 1] -= 1
    return deepest


# Rows are processed in blocks so the per-node work buffers stay
# cache-resident regardless of the dataset size.
BLOCK = 512


@njit(cache=True)
def eval_tree(codes, values, Xt):
    """Evaluate a prefix-encoded tree on ``Xt`` of shape (n_features, n)."""
    m = codes.shape[0]
    n = Xt.shape[1]
    n_terminals = 0
    for i in range(m):
        if codes[i] >= CONST:
            n_terminals += 1
    width = BLOCK if n > BLOCK else n
    stack = np.empty((n_terminals + 1, width))
    out = np.empty(n)
    for lo in range(0, n, width):
        hi = min(lo + width, n)
        w = hi - lo
        sp = 0
        for idx in range(m - 1, -1, -1):
            c = codes[idx]
            if c >= VAR0:
                f = c - VAR0
                for j in range(w):
                    stack[sp, j] = Xt[f, lo + j]
                sp += 1
            elif c == CONST:
                v = values[idx]
                for j in range(w):
                    stack[sp, j] = v
                sp += 1
            elif c < N_BINARY:
                for j in range(w):
                    a = stack[sp - 1, j]
                    b = stack[sp - 2, j]
                    if c == ADD:
                        r = a + b
                    elif c == SUB:
                        r = a - b
                    elif c == MUL:
                        r = a * b
                    else:
                        r = 0.0 if b == 0.0 else a / b
                    stack[sp - 2, j] = _guard(r)
                sp -= 1
            else:
                for j in range(w):
                    a = stack[sp - 1, j]
                    if c == SIN:
                        r = np.sin(a)
                    elif c == COS:
                        r = np.cos(a)
                    elif c == TAN:
                        r = np.tan(a)
                    elif c == EXP:
                        if a > EXP_ARG_LIMIT:
                            a = EXP_ARG_LIMIT
                        elif a < -EXP_ARG_LIMIT:
                            a = -EXP_ARG_LIMIT
                        r = np.exp(a)
                    else:
                        r = np.log(abs(a) + LOG_EPS)
                    stack[sp - 1, j] = _guard(r)
        for j in range(w):
            out[lo + j] = stack[0, j]
    return out


@njit(cache=True)
def eval_tree_grad(codes, values, Xt):
    """Forward pass plus Jacobian of the output w.r.t. the constant leaves.

    Returns ``(pred, jac)`` with ``jac`` of shape (n, n_constants); constant
    columns are ordered by position in the prefix array.
    """
    m = codes.shape[0]
    n = Xt.shape[1]

    # Subtree sizes (needed to locate children in the adjoint pass).
    sizes = np.empty(m, np.int64)
    sstack = np.empty(m, np.int64)
    sp = 0
    n_consts = 0
    for i in range(m - 1, -1, -1):
        c = codes[i]
        if c >= CONST:
            s = 1
            if c == CONST:
                n_consts += 1
        elif c < N_BINARY:
            s = 1 + sstack[sp - 1] + sstack[sp - 2]
            sp -= 2
        else:
            s = 1 + sstack[sp - 1]
            sp -= 1
        sizes[i] = s
        sstack[sp] = s
        sp += 1

    ccol = np.full(m, -1, np.int64)
    cc = 0
    for i in range(m):
        if codes[i] == CONST:
            ccol[i] = cc
            cc += 1

    pred = np.empty(n)
    jac = np.zeros((n, n_consts))
    width = BLOCK if n > BLOCK else n
    # Per-block work buffers: node outputs, protection mask (elements where a
    # rule or clamp fired and the derivative through the node is 0), and
    # adjoints.
    vals = np.empty((m, width))
    mask = np.empty((m, width), np.uint8)
    adj = np.empty((m, width))
    istack = np.empty(m, np.int64)

    for lo in range(0, n, width):
        hi = min(lo + width, n)
        w = hi - lo
        # Forward pass storing every node's output for this block.
        sp = 0
        for i in range(m - 1, -1, -1):
            c = codes[i]
            if c >= VAR0:
                f = c - VAR0
                for j in range(w):
                    vals[i, j] = Xt[f, lo + j]
                    mask[i, j] = 0
            elif c == CONST:
                v = values[i]
                for j in range(w):
                    vals[i, j] = v
                    mask[i, j] = 0
            elif c < N_BINARY:
                L = istack[sp - 1]
                R = istack[sp - 2]
                sp -= 2
                for j in range(w):
                    a = vals[L, j]
                    b = vals[R, j]
                    mask[i, j] = 0
                    if c == ADD:
                        r = a + b
                    elif c == SUB:
                        r = a - b
                    elif c == MUL:
                        r = a * b
                    else:
                        if b == 0.0:
                            vals[i, j] = 0.0
                            mask[i, j] = 1
                            continue
                        r = a / b
                    g = _guard(r)
                    if g != r:
                        mask[i, j] = 1
                    vals[i, j] = g
            else:
                A = istack[sp - 1]
                sp -= 1
                for j in range(w):
                    a = vals[A, j]
                    mask[i, j] = 0
                    if c == SIN:
                        r = np.sin(a)
                    elif c == COS:
                        r = np.cos(a)
                    elif c == TAN:
                        r = np.tan(a)
                    elif c == EXP:
                        if a > EXP_ARG_LIMIT or a < -EXP_ARG_LIMIT:
                            mask[i, j] = 1
                            a = EXP_ARG_LIMIT if a > 0.0 else -EXP_ARG_LIMIT
                        r = np.exp(a)
                    else:
                        r = np.log(abs(a) + LOG_EPS)
                    g = _guard(r)
                    if g != r:
                        mask[i, j] = 1
                    vals[i, j] = g
            istack[sp] = i
            sp += 1

        for j in range(w):
            pred[lo + j] = vals[0, j]
        if n_consts == 0:
            continue

        # Adjoint pass: parents precede children in prefix order, so a single
        # left-to-right sweep has every node's adjoint ready when reached.
        for j in range(w):
            adj[0, j] = 1.0
        for i in range(m):
            c = codes[i]
            if c == CONST:
                col = ccol[i]
                for j in range(w):
                    jac[lo + j, col] = adj[i, j]
            elif c >= VAR0:
                continue
            elif c < N_BINARY:
                L = i + 1
                R = L + sizes[L]
                for j in range(w):
                    g = adj[i, j]
                    if g == 0.0 or mask[i, j] == 1:
                        adj[L, j] = 0.0
                        adj[R, j] = 0.0
                    elif c == ADD:
                        adj[L, j] = g
                        adj[R, j] = g
                    elif c == SUB:
                        adj[L, j] = g
                        adj[R, j] = -g
                    elif c == MUL:
                        adj[L, j] = g * vals[R, j]
                        adj[R, j] = g * vals[L, j]
                    else:
                        vb = vals[R, j]
                        adj[L, j] = g / vb
                        adj[R, j] = -g * vals[i, j] / vb
            else:
                A = i + 1
                for j in range(w):
                    g = adj[i, j]
                    if g == 0.0 or mask[i, j] == 1:
                        adj[A, j] = 0.0
                    elif c == SIN:
                        adj[A, j] = g * np.cos(vals[A, j])
                    elif c == COS:
                        adj[A, j] = -g * np.sin(vals[A, j])
                    elif c == TAN:
                        t = vals[i, j]
                        adj[A, j] = g * (1.0 + t * t)
                    elif c == EXP:
                        adj[A, j] = g * vals[i, j]
                    else:
                        va = vals[A, j]
                        if va > 0.0:
                            adj[A, j] = g / (va + LOG_EPS)
                        elif va < 0.0:
                            adj[A, j] = g / (va - LOG_EPS)
                        else:
                            adj[A, j] = 0.0
    return pred, jac


@njit(cache=True)
def scale_and_mse(pred, y):
    """Least-squares linear scaling (a, b) of ``pred`` onto ``y`` plus MSE.

    Degenerate predictions (zero variance, or a non-finite slope) fall back
    to b = 0, a = mean(y).
    """
    n = pred.shape[0]
    mp = 0.0
    my = 0.0
    for j in range(n):
        mp += pred[j]
        my += y[j]
    mp /= n
    my /= n
    spp = 0.0
    spy = 0.0
    for j in range(n):
        dp = pred[j] - mp
        spp += dp * dp
        spy += dp * (y[j] - my)
    b = 0.0
    a = my
    if spp > 0.0 and np.isfinite(spp) and np.isfinite(spy):
        bb = spy / spp
        if np.isfinite(bb):
            aa = my - bb * mp
            if np.isfinite(aa):
                a = aa
                b = bb
    mse = 0.0
    for j in range(n):
        e = y[j] - (a + b * pred[j])
        mse += e * e
    mse /= n
    if not np.isfinite(mse):
        a = my
        b = 0.0
        mse = 0.0
        for j in range(n):
            e = y[j] - a
            mse += e * e
        mse /= n
    return a, b, mse


@njit(cache=True)
def lm_refine_constants(codes, values, Xt, y, max_iter):
    """Damped Gauss-Newton refinement of the constant leaves.

    The linear-scaling coefficients are folded into the residual (refit after
    every proposal), each of the ``max_iter`` proposals is accepted only if
    it lowers the scaled training MSE, and the damping factor shrinks on
    success and grows on rejection. Returns the best constants seen, their
    predictions and MSE, and the number of accepted steps. The caller must
    guarantee at least one constant node.
    """
    m = codes.shape[0]
    k = 0
    for i in range(m):
        if codes[i] == CONST:
            k += 1
    cpos = np.empty(k, np.int64)
    cc = 0
    for i in range(m):
        if codes[i] == CONST:
            cpos[cc] = i
            cc += 1

    cur = values.copy()
    pred, jac = eval_tree_grad(codes, cur, Xt)
    a, b, best_mse = scale_and_mse(pred, y)
    best_vals = cur.copy()
    best_pred = pred.copy()
    lam = 1e-3
    accepted = 0
    n = y.shape[0]
    # Normal equations for the scaled residual: M = b^2 J'J, g = b J'r.
    # They change only when a step is accepted (new J, new scaling), so
    # rejected proposals reuse them with a larger damping factor.
    M = np.empty((k, k))
    g = np.empty(k)
    need_system = True
    md = 0.0
    for _ in range(max_iter):
        if need_system:
            for c in range(k):
                g[c] = 0.0
                for d in range(c, k):
                    M[c, d] = 0.0
            for j in range(n):
                r = y[j] - (a + b * pred[j])
                for c in range(k):
                    js = b * jac[j, c]
                    g[c] += js * r
                    for d in range(c, k):
                        M[c, d] += js * (b * jac[j, d])
            finite = True
            md = 0.0
            for c in range(k):
                md += M[c, c]
                if not np.isfinite(g[c]):
                    finite = False
                for d in range(c, k):
                    M[d, c] = M[c, d]
                    if not np.isfinite(M[c, d]):
                        finite = False
            if not finite or not np.isfinite(md):
                break
            md /= k
            need_system = False
        if b == 0.0:
            break
        A = M.copy()
        damp = lam * md + 1e-12
        for c in range(k):
            A[c, c] += damp
        delta = np.linalg.solve(A, g)
        ok = True
        for c in range(k):
            if not np.isfinite(delta[c]):
                ok = False
        if not ok:
            lam *= 10.0
            if lam > 1e10:
                break
            continue
        trial = cur.copy()
        for c in range(k):
            trial[cpos[c]] += delta[c]
        predt = eval_tree(codes, trial, Xt)
        _, _, mset = scale_and_mse(predt, y)
        if mset < best_mse:
            cur = trial
            best_vals = trial.copy()
            best_pred = predt
            best_mse = mset
            accepted += 1
            lam *= 0.3
            if lam < 1e-12:
                lam = 1e-12
            pred, jac = eval_tree_grad(codes, cur, Xt)
            a, b, _ = scale_and_mse(pred, y)
            need_system = True
        else:
            lam *= 10.0
            if lam > 1e10:
                break
    return best_vals, best_pred, best_mse, accepted
