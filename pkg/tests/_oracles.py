"""Hand-rolled reference computations the tests freeze expectations against.

Everything in this file is raw numpy on purpose: no package solver is called,
so agreement between a solver and its oracle here is meaningful evidence and
not a tautology.
"""

import numpy as np


def dense_prox_solution(I, gamma, center, lam=0.0, linear=None, extra_terms=()):
    """Minimizer of the batch least-squares objective plus quadratic pulls.

        (1/2b) sum_i (x_i'w - y_i)^2 + (lam/2)||w||^2 + <linear, w>
            + (gamma/2)||w - center||^2 + sum_j (rho_j/2)||w - c_j||^2

    solved by dense normal equations.  Unconstrained only.
    """
    X = np.asarray(I.X, dtype=float)
    y = np.asarray(I.y, dtype=float)
    b, d = X.shape
    rho_total = sum(rho for rho, _ in extra_terms)
    H = X.T @ X / b + (lam + gamma + rho_total) * np.eye(d)
    rhs = X.T @ y / b + gamma * np.asarray(center, dtype=float)
    if linear is not None:
        rhs = rhs - np.asarray(linear, dtype=float)
    for rho, c in extra_terms:
        rhs = rhs + rho * np.asarray(c, dtype=float)
    return np.linalg.solve(H, rhs)


def pgd_ball_prox_solution(I, gamma, center, B, lam=0.0, iters=200_000):
    """Ball-constrained version of dense_prox_solution via projected gradient.

    Slow but independent: fixed 1/smoothness stepsize, hard iteration count,
    no certification logic shared with the package.
    """
    X = np.asarray(I.X, dtype=float)
    y = np.asarray(I.y, dtype=float)
    b, d = X.shape
    H = X.T @ X / b + (lam + gamma) * np.eye(d)
    rhs = X.T @ y / b + gamma * np.asarray(center, dtype=float)
    step = 1.0 / float(np.linalg.eigvalsh(H).max())
    w = np.zeros(d)
    for _ in range(iters):
        w = w - step * (H @ w - rhs)
        nrm = np.linalg.norm(w)
        if nrm > B:
            w = (B / nrm) * w
    return w


def ls_sample_grad(w, x, y, lam=0.0):
    return (float(x @ w) - y) * x + lam * np.asarray(w, dtype=float)


def svrg_epoch_single_machine(model_lam, I, w_prev, gamma, eta_step, order):
    """One machine, one sub-batch, one inner pass of the two-loop solver.

    Replays the k=1 inner step when the whole b-sample batch is the single
    sub-batch: anchor gradient at z_0 = w_prev, variance-reduced sweep in
    ``order``, new iterate = mean of the |I|+1 visited points computed in
    displacement form.  Returns (x_out, z_next).
    """
    X = np.asarray(I.X, dtype=float)
    y = np.asarray(I.y, dtype=float)
    b = X.shape[0]
    w_prev = np.asarray(w_prev, dtype=float)
    anchor = np.zeros_like(w_prev)
    for i in range(b):
        anchor += ls_sample_grad(w_prev, X[i], float(y[i]), model_lam)
    anchor /= b
    anchor_grads = [ls_sample_grad(w_prev, X[i], float(y[i]), model_lam) for i in range(b)]
    x0 = w_prev.copy()
    x = w_prev.copy()
    disp = np.zeros_like(x)
    for idx in order:
        g = ls_sample_grad(x, X[idx], float(y[idx]), model_lam)
        x = x - eta_step * (g - anchor_grads[idx] + anchor + gamma * (x - w_prev))
        disp += x - x0
    z = x0 + disp / (len(order) + 1)
    return x, z


def weighted_average(ws, weights):
    """Running weighted average exactly as an accumulator would build it."""
    acc = np.zeros_like(ws[0])
    wsum = 0.0
    for w, wt in zip(ws, weights):
        acc = acc + wt * w
        wsum += wt
    return acc / wsum
