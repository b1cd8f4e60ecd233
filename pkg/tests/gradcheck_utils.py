"""Finite-difference oracle for the kernel-training objective."""

import math

import numpy as np

from nfselect.deep_mmd import KernelParams, mmd2_u, variance_hat


def objective_value(mlp, lsp, lsq, le, xs, ys, lam):
    params = KernelParams(mlp=mlp, log_sigma_phi=lsp, log_sigma_q=lsq, logit_eps=le)
    return mmd2_u(params, xs, ys) / math.sqrt(variance_hat(params, xs, ys, lam))


def numeric_gradients(mlp, lsp, lsq, le, xs, ys, lam, step=1e-5):
    """Central differences over every MLP weight, bias, and scalar."""

    def value():
        return objective_value(mlp, lsp, lsq, le, xs, ys, lam)

    grads_w = [np.zeros_like(w) for w in mlp.weights]
    grads_b = [np.zeros_like(b) for b in mlp.biases]
    for w, gw in zip(mlp.weights, grads_w):
        flat, gflat = w.ravel(), gw.ravel()
        for t in range(flat.size):
            orig = flat[t]
            flat[t] = orig + step
            up = value()
            flat[t] = orig - step
            down = value()
            flat[t] = orig
            gflat[t] = (up - down) / (2 * step)
    for b, gb in zip(mlp.biases, grads_b):
        for t in range(b.size):
            orig = b[t]
            b[t] = orig + step
            up = value()
            b[t] = orig - step
            down = value()
            b[t] = orig
            gb[t] = (up - down) / (2 * step)
    scal = []
    for idx in range(3):
        vals = [lsp, lsq, le]
        vals[idx] += step
        up = objective_value(mlp, vals[0], vals[1], vals[2], xs, ys, lam)
        vals = [lsp, lsq, le]
        vals[idx] -= step
        down = objective_value(mlp, vals[0], vals[1], vals[2], xs, ys, lam)
        scal.append((up - down) / (2 * step))
    return grads_w, grads_b, scal


def max_rel_err(analytic, numeric, floor=1e-5):
    """Worst relative disagreement.

    The denominator is floored so near-zero gradients stay meaningful: the
    central-difference estimate itself carries roundoff noise of about
    eps * |J| / step ~ 5e-10, so below the floor the check still demands
    agreement to 1e-9 absolute (rel bound 1e-4 times the floor) without
    amplifying that noise into spurious failures.
    """
    analytic = np.asarray(analytic, dtype=np.float64).ravel()
    numeric = np.asarray(numeric, dtype=np.float64).ravel()
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))
