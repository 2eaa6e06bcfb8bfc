"""Gradient-based minimizer of the readout training cost, independent of
the closed-form solver.  Used as the reference implementation in tests.

The cost is C(W) = sum_t ||W r_t - u_t||^2 + gamma * ||W||_F^2, a strictly
convex quadratic for gamma > 0, so conjugate gradient descent with exact
line search from a random start converges to the unique minimizer using
nothing but cost gradients.
"""

import numpy as np


def ridge_cost_reference(r, u, w, gamma):
    resid = w @ r - u
    return float(np.sum(resid**2) + gamma * np.sum(w**2))


def minimize_ridge_cost(r, u, gamma, rng, max_iters=20000):
    """Polak-Ribiere conjugate gradient descent with exact line search."""
    r = np.asarray(r, dtype=float)
    u = np.atleast_2d(np.asarray(u, dtype=float))
    w = rng.standard_normal((u.shape[0], r.shape[0]))

    def grad(w):
        return 2.0 * ((w @ r) @ r.T + gamma * w - u @ r.T)

    g = grad(w)
    direction = -g
    gscale = max(1.0, float(np.linalg.norm(u @ r.T)))
    for _ in range(max_iters):
        # Hessian action on the search direction; exact step for a quadratic
        hd = 2.0 * ((direction @ r) @ r.T + gamma * direction)
        denom = float(np.sum(direction * hd))
        if denom <= 0.0:
            break
        step = -float(np.sum(g * direction)) / denom
        w = w + step * direction
        g_new = grad(w)
        if np.linalg.norm(g_new) <= 1e-13 * gscale:
            break
        beta = max(0.0, float(np.sum(g_new * (g_new - g)) / np.sum(g * g)))
        direction = -g_new + beta * direction
        g = g_new
    return w
