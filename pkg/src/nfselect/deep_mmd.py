"""Deep-kernel two-sample testing on scalar samples.

The kernel mixes a Gaussian kernel on features extracted by a small MLP
with a Gaussian kernel on the raw inputs:

    k(x, y) = [(1 - eps) * exp(-|phi(x) - phi(y)|^2 / (2 sig_phi^2)) + eps]
              * exp(-(x - y)^2 / (2 sig_q^2))

so k(x, x) = 1 and k is symmetric for every parameter setting. Training
maximizes the squared-discrepancy U-statistic over its estimated standard
deviation via plain gradient ascent with adaptive moments; all gradients
are analytic (hand backprop), which the test suite checks against central
finite differences. Calibration is by permutation of the pooled sample.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from ._seeding import spawn_rng


@dataclass
class Mlp:
    """Fully connected net, rectifier hidden layers, identity output."""

    weights: list
    biases: list

    @classmethod
    def init(cls, widths, rng):
        """Gaussian init with std sqrt(2 / fan_in); zero biases."""
        weights, biases = [], []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            weights.append(rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(weights=weights, biases=biases)

    def forward(self, x):
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.maximum(h, 0.0)
        return h

    def _forward_cached(self, x):
        acts = [x]
        pre = []
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            pre.append(z)
            h = np.maximum(z, 0.0) if i < last else z
            acts.append(h)
        return h, (acts, pre)

    def _backward(self, cache, d_out):
        acts, pre = cache
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        d = d_out
        for i in range(len(self.weights) - 1, -1, -1):
            if i < len(self.weights) - 1:
                d = d * (pre[i] > 0.0)
            grads_w[i] = acts[i].T @ d
            grads_b[i] = d.sum(axis=0)
            if i > 0:
                d = d @ self.weights[i].T
        return grads_w, grads_b

@dataclass
class KernelParams:
    """Trained deep-kernel state.

    The lengthscales live on log scale and the mixing weight on a logit,
    so sig_phi > 0, sig_q > 0 and 0 < eps_mix < 1 hold by construction.
    ``degenerate`` flags training input that was all one value.
    """

    mlp: Mlp
    log_sigma_phi: float
    log_sigma_q: float
    logit_eps: float
    degenerate: bool = False
    history: np.ndarray = None

    @property
    def sigma_phi(self):
        return math.exp(self.log_sigma_phi)

    @property
    def sigma_q(self):
        return math.exp(self.log_sigma_q)

    @property
    def eps_mix(self):
        return 1.0 / (1.0 + math.exp(-self.logit_eps))


@dataclass
class KernelTrainConfig:
    epochs: int = 200
    learning_rate: float = 5e-4
    lam: float = 1e-8
    seed: int = 0
    hidden: tuple = (32, 32)
    feature_dim: int = 8
    track_objective: bool = False


@dataclass
class TestResult:
    statistic: float
    perm_stats: np.ndarray
    threshold: float
    p_value: float
    reject: bool


def _sq_dists(a, b):
    """Pairwise squared Euclidean distances between rows of a and b."""
    aa = np.einsum("ij,ij->i", a, a)
    bb = np.einsum("ij,ij->i", b, b)
    d = aa[:, None] + bb[None, :] - 2.0 * (a @ b.T)
    return np.maximum(d, 0.0)


def _cross_matrix(kernel, a, b):
    """Kernel matrix between two scalar samples; ``kernel`` is either
    KernelParams or a plain-Gaussian bandwidth."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    dq = (a[:, None] - b[None, :]) ** 2
    if isinstance(kernel, KernelParams):
        pa = kernel.mlp.forward(a[:, None])
        pb = kernel.mlp.forward(b[:, None])
        dphi = _sq_dists(pa, pb)
        dphi[dq == 0.0] = 0.0  # equal inputs map to equal features exactly
        eps = kernel.eps_mix
        kphi = np.exp(-dphi / (2.0 * kernel.sigma_phi**2))
        q = np.exp(-dq / (2.0 * kernel.sigma_q**2))
        return ((1.0 - eps) * kphi + eps) * q
    bw = float(kernel)
    return np.exp(-dq / (2.0 * bw**2))


def kernel_eval(params, x: float, y: float) -> float:
    """Kernel value at a single pair of scalars."""
    return float(_cross_matrix(params, [x], [y])[0, 0])


def _h_matrix(kernel, xs, ys):
    kxx = _cross_matrix(kernel, xs, xs)
    kyy = _cross_matrix(kernel, ys, ys)
    kxy = _cross_matrix(kernel, xs, ys)
    return kxx + kyy - kxy - kxy.T


def _check_two_sample(xs, ys):
    xs = np.asarray(xs, dtype=np.float64).ravel()
    ys = np.asarray(ys, dtype=np.float64).ravel()
    if xs.size != ys.size:
        raise ValueError("samples must have equal size")
    if xs.size < 2:
        raise ValueError("need at least two points per sample")
    return xs, ys


def mmd2_u(kernel, xs, ys) -> float:
    """Unbiased squared-discrepancy U-statistic.

    Averages h_ij = k(x_i,x_j) + k(y_i,y_j) - k(x_i,y_j) - k(y_i,x_j)
    over all ordered pairs with i != j.
    """
    xs, ys = _check_two_sample(xs, ys)
    h = _h_matrix(kernel, xs, ys)
    m = xs.size
    return float((h.sum() - np.trace(h)) / (m * (m - 1)))


def variance_hat(kernel, xs, ys, lam: float) -> float:
    """Regularized variance estimate of the U-statistic.

    Uses the full h matrix including its diagonal:
    4 m^-3 sum_i (sum_j h_ij)^2 - 4 m^-4 (sum_ij h_ij)^2 + lam,
    floored at lam since the data part may go negative in samples.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    xs, ys = _check_two_sample(xs, ys)
    h = _h_matrix(kernel, xs, ys)
    m = xs.size
    row = h.sum(axis=1)
    data = 4.0 / m**3 * (row @ row) - 4.0 / m**4 * h.sum() ** 2
    return float(max(data, 0.0) + lam)


def _objective_and_grads(mlp, log_sigma_phi, log_sigma_q, logit_eps, xs, ys, lam):
    """Value and analytic gradients of J = mmd2_u / sqrt(variance_hat).

    One pooled forward pass; gradients flow through the statistic, the
    variance estimate, both Gaussian envelopes, the mixing weight and the
    feature extractor.
    """
    m = xs.size
    z = np.concatenate([xs, ys])[:, None]
    phi, cache = mlp._forward_cached(z)

    sig_phi = math.exp(log_sigma_phi)
    sig_q = math.exp(log_sigma_q)
    eps = 1.0 / (1.0 + math.exp(-logit_eps))

    dphi = _sq_dists(phi, phi)
    dq = (z - z.T) ** 2
    dphi[dq == 0.0] = 0.0
    kphi = np.exp(-dphi / (2.0 * sig_phi**2))
    q = np.exp(-dq / (2.0 * sig_q**2))
    k = ((1.0 - eps) * kphi + eps) * q

    h = k[:m, :m] + k[m:, m:] - k[:m, m:] - k[m:, :m]
    u = (h.sum() - np.trace(h)) / (m * (m - 1))
    row = h.sum(axis=1)
    total = h.sum()
    vdata = 4.0 / m**3 * (row @ row) - 4.0 / m**4 * total**2
    v = max(vdata, 0.0) + lam
    s = math.sqrt(v)
    j = u / s

    # dJ/dH
    du_dh = (1.0 - np.eye(m)) / (m * (m - 1))
    if vdata > 0.0:
        dv_dh = 8.0 / m**3 * row[:, None] - 8.0 / m**4 * total
    else:
        dv_dh = 0.0
    g_h = du_dh / s + (-u / (2.0 * v * s)) * dv_dh

    # scatter into the pooled kernel-matrix gradient
    g_k = np.zeros_like(k)
    g_k[:m, :m] += g_h
    g_k[m:, m:] += g_h
    g_k[:m, m:] -= g_h
    g_k[m:, :m] -= g_h

    d_mix = g_k * q  # gradient w.r.t. the bracketed mixture
    d_q = g_k * ((1.0 - eps) * kphi + eps)

    d_kphi = d_mix * (1.0 - eps)
    g_logit_eps = float((d_mix * (1.0 - kphi)).sum() * eps * (1.0 - eps))
    g_log_sigma_phi = float((d_kphi * kphi * dphi).sum() / sig_phi**2)
    g_log_sigma_q = float((d_q * q * dq).sum() / sig_q**2)

    # back through the squared feature distances into the extractor
    w = d_kphi * kphi * (-1.0 / (2.0 * sig_phi**2))
    ws = w + w.T
    d_phi_out = 2.0 * (ws.sum(axis=1)[:, None] * phi - ws @ phi)
    grads_w, grads_b = mlp._backward(cache, d_phi_out)

    return j, grads_w, grads_b, g_log_sigma_phi, g_log_sigma_q, g_logit_eps


def _median_heuristic(values_2d):
    """Median pairwise distance; falls back to the positive median, then 1."""
    d = np.sqrt(_sq_dists(values_2d, values_2d))
    iu = np.triu_indices(d.shape[0], k=1)
    flat = d[iu]
    med = float(np.median(flat))
    if med <= 0.0:
        positive = flat[flat > 0.0]
        med = float(np.median(positive)) if positive.size else 1.0
    return med


def train_kernel(train_xs, train_ys, config: KernelTrainConfig) -> KernelParams:
    """Fit the deep kernel by maximizing the ratio objective.

    Initialization: fan-in-scaled Gaussian MLP weights, lengthscales from
    the median heuristic (extracted features for sig_phi, raw inputs for
    sig_q), mixing weight 0.1. With all training points identical there is
    nothing to fit; the initialized parameters come back flagged.
    """
    xs, ys = _check_two_sample(train_xs, train_ys)
    widths = (1, *config.hidden, config.feature_dim)
    rng = spawn_rng(config.seed, "kernel-init")
    mlp = Mlp.init(widths, rng)
    logit_eps = math.log(0.1 / 0.9)

    z = np.concatenate([xs, ys])[:, None]
    if float(z.max() - z.min()) == 0.0:
        return KernelParams(
            mlp=mlp,
            log_sigma_phi=0.0,
            log_sigma_q=0.0,
            logit_eps=logit_eps,
            degenerate=True,
        )
    log_sigma_q = math.log(_median_heuristic(z))
    log_sigma_phi = math.log(_median_heuristic(mlp.forward(z)))

    arrays = [*mlp.weights, *mlp.biases]
    scalars = np.array([log_sigma_phi, log_sigma_q, logit_eps])
    mom1 = [np.zeros_like(a) for a in arrays] + [np.zeros_like(scalars)]
    mom2 = [np.zeros_like(a) for a in arrays] + [np.zeros_like(scalars)]
    beta1, beta2, tiny = 0.9, 0.999, 1e-8
    lr = config.learning_rate
    history = np.empty(config.epochs) if config.track_objective else None

    n_w = len(mlp.weights)
    for epoch in range(config.epochs):
        j, gw, gb, gsp, gsq, geps = _objective_and_grads(
            mlp, scalars[0], scalars[1], scalars[2], xs, ys, config.lam
        )
        if history is not None:
            history[epoch] = j
        grads = [*gw, *gb, np.array([gsp, gsq, geps])]
        t = epoch + 1
        c1 = 1.0 - beta1**t
        c2 = 1.0 - beta2**t
        for i, g in enumerate(grads):
            mom1[i] = beta1 * mom1[i] + (1.0 - beta1) * g
            mom2[i] = beta2 * mom2[i] + (1.0 - beta2) * g * g
            step = lr * (mom1[i] / c1) / (np.sqrt(mom2[i] / c2) + tiny)
            target = arrays[i] if i < len(arrays) else scalars
            target += step  # ascent
    return KernelParams(
        mlp=mlp,
        log_sigma_phi=float(scalars[0]),
        log_sigma_q=float(scalars[1]),
        logit_eps=float(scalars[2]),
        history=history,
    )


def _pooled_matrix(kernel, pooled):
    return _cross_matrix(kernel, pooled, pooled)


def _stat_from_pooled(k_pool, ix, iy):
    h = (
        k_pool[np.ix_(ix, ix)]
        + k_pool[np.ix_(iy, iy)]
        - k_pool[np.ix_(ix, iy)]
        - k_pool[np.ix_(iy, ix)]
    )
    m = ix.size
    return float((h.sum() - np.trace(h)) / (m * (m - 1)))


def permutation_test(params, xs, ys, n_perm: int, alpha: float, seed) -> TestResult:
    """Permutation calibration of the two-sample statistic.

    Pools both samples, recomputes the statistic under ``n_perm`` random
    half/half reassignments, and rejects when the observed value exceeds
    the ceil((1-alpha)(n_perm+1))-th order statistic of the replicas. The
    add-one p-value (1 + #{replica >= observed}) / (1 + n_perm) is never
    zero, keeping the test exact-level.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if n_perm < 1:
        raise ValueError("n_perm must be >= 1")
    xs, ys = _check_two_sample(xs, ys)
    m = xs.size
    pooled = np.concatenate([xs, ys])
    k_pool = _pooled_matrix(params, pooled)
    stat = _stat_from_pooled(k_pool, np.arange(m), np.arange(m, 2 * m))

    perm_stats = np.empty(n_perm)
    for jrep in range(n_perm):
        perm = spawn_rng(seed, "perm", jrep).permutation(2 * m)
        perm_stats[jrep] = _stat_from_pooled(k_pool, perm[:m], perm[m:])

    p_value = float((1 + (perm_stats >= stat).sum()) / (1 + n_perm))
    rank = math.ceil((1.0 - alpha) * (n_perm + 1))
    threshold = float(np.sort(perm_stats)[rank - 1]) if rank <= n_perm else math.inf
    return TestResult(
        statistic=stat,
        perm_stats=perm_stats,
        threshold=threshold,
        p_value=p_value,
        reject=bool(stat > threshold),
    )


def deep_mmd_test(xs, ys, train_config: KernelTrainConfig, n_perm: int, alpha: float, seed):
    """Train-then-test on disjoint halves.

    The first half of each sample trains the kernel and the second half is
    tested; selecting the kernel on the tested points would invalidate the
    permutation null. Returns (TestResult, KernelParams).
    """
    xs, ys = _check_two_sample(xs, ys)
    if xs.size < 4:
        raise ValueError("need at least 4 points per sample to split and test")
    half = xs.size // 2
    train_seed = int(spawn_rng(seed, "kernel-train").integers(1, 2**63))
    params = train_kernel(
        xs[:half], ys[:half], replace(train_config, seed=train_seed)
    )
    result = permutation_test(params, xs[half:], ys[half:], n_perm, alpha, seed)
    return result, params
