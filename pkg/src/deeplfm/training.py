"""Stochastic variational inference: ELBO, KL terms, AdamW, train loop.

The objective per step is an unbiased minibatch estimate of the evidence
lower bound,

    (N / M) * sum_batch mean_over_bank log p(y | x, sampled params)
        - KL[q(params) || p(params | hyperparams)],

where the expectation over the variational posterior runs over the full
fixed bank of reparameterization draws every step. The KL between the
mean-field Gaussian posterior and its Gaussian prior is computed in
closed form inside the same graph, so one backward pass per iteration
produces all gradients.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .data import Normalization
from .errors import ParameterError, TrainingError
from .metrics import mnll, nmse

_LOG_2PI = float(np.log(2.0 * np.pi))


def kl_diag_normal(mean, raw_log_var, prior_mean, prior_var):
    """Closed-form KL between diagonal Gaussians, summed over coordinates.

    The posterior has the given mean tensor and log-variance tensor; the
    prior has scalar mean ``prior_mean`` and variance ``prior_var`` (a
    Tensor broadcastable to the posterior shape, or None for unit
    variance). Per coordinate:

        0.5 * (log(vp/vq) - 1 + vq/vp + (mq - mp)^2 / vp)
    """
    vq = ad.exp(raw_log_var)
    diff = ad.sub(mean, prior_mean) if prior_mean != 0.0 else mean
    if prior_var is None:
        expr = ad.sub(ad.add(vq, ad.square(diff)), ad.add(raw_log_var, 1.0))
    else:
        log_vp = ad.log(prior_var)
        quad = ad.div(ad.add(vq, ad.square(diff)), prior_var)
        expr = ad.sub(ad.add(log_vp, quad), ad.add(raw_log_var, 1.0))
    return ad.mul(ad.tensor_sum(expr), 0.5)


def gaussian_log_likelihood(y, mean, noise_var):
    """Sum over rows and outputs of log N(y | mean, noise_var).

    y: constant Tensor or array (b, d); mean: Tensor (b, d);
    noise_var: Tensor (1, d), strictly positive.
    """
    if not isinstance(y, Tensor):
        y = Tensor(np.asarray(y, dtype=np.float64))
    b = y.data.shape[0]
    resid = ad.square(ad.sub(y, mean))
    quad = ad.tensor_sum(ad.div(resid, noise_var))
    log_det = ad.mul(ad.tensor_sum(ad.log(noise_var)), float(b))
    const = float(b * y.data.shape[1]) * _LOG_2PI
    return ad.mul(ad.add(ad.add(quad, log_det), const), -0.5)


def elbo_estimate(net, x, y, n_total, mc_indices=None):
    """Minibatch ELBO estimate as a scalar Tensor (maximize this).

    x, y: the minibatch in normalized units; n_total: size of the full
    training set; mc_indices: bank entries to average over (defaults to
    the whole bank).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    m = x.shape[0]
    if m == 0:
        raise ParameterError("elbo_estimate: empty batch")
    if mc_indices is None:
        mc_indices = np.arange(net.n_mc)
    r = len(mc_indices)
    mean = net.forward_stacked(x, mc_indices)
    y_tile = Tensor(np.tile(y, (r, 1)))
    ll = gaussian_log_likelihood(y_tile, mean, net.noise_variance())
    scale = float(n_total) / (m * r)
    return ad.sub(ad.mul(ll, scale), net.kl_divergence())


class AdamW:
    """Adam with decoupled weight decay.

    Parameters named in ``exempt`` (kernel hyperparameters, likelihood
    noise) receive no weight decay. The decay is applied directly to the
    parameter value, scaled by the learning rate, so with lr = 0 nothing
    moves at all.
    """

    def __init__(self, params, lr=0.01, betas=(0.9, 0.999), eps=1e-8,
                 weight_decay=0.01, exempt=()):
        if lr < 0 or weight_decay < 0:
            raise ParameterError("AdamW: lr and weight_decay must be >= 0")
        self.params = dict(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.exempt = set(exempt)
        self.t = 0
        self._m = {name: np.zeros_like(p.data) for name, p in self.params.items()}
        self._v = {name: np.zeros_like(p.data) for name, p in self.params.items()}

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def step(self):
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                raise TrainingError(f"parameter {name!r} has no gradient")
            g = np.asarray(g, dtype=np.float64)
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            if self.weight_decay and name not in self.exempt:
                update = update + self.weight_decay * p.data
            p.data = p.data - self.lr * update


@dataclass
class TrainConfig:
    max_iterations: int = 500
    batch_size: int = 1000
    learning_rate: float = 0.01
    weight_decay: float = 0.01
    betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8
    validation_fraction: float = 0.01
    log_every: int = 50
    seed: int = 0
    input_normalization: str = "zscore"

    def validate(self):
        if self.max_iterations < 0:
            raise ParameterError("TrainConfig: max_iterations must be >= 0")
        if self.batch_size < 1:
            raise ParameterError("TrainConfig: batch_size must be >= 1")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ParameterError(
                "TrainConfig: validation_fraction must be in [0, 1)"
            )
        if self.log_every < 1:
            raise ParameterError("TrainConfig: log_every must be >= 1")
        if self.input_normalization not in ("zscore", "identity"):
            raise ParameterError(
                "TrainConfig: input_normalization must be 'zscore' or "
                "'identity'"
            )


@dataclass
class TraceRow:
    iteration: int
    elbo: float
    val_nmse: float
    val_mnll: float


@dataclass
class TrainResult:
    trace: list = field(default_factory=list)
    final_elbo: float = float("nan")
    n_iterations: int = 0
    wall_time_s: float = 0.0
    normalization: Normalization = None


# stream keys for the run-level generators (model construction uses 0-2)
_STREAM_SHUFFLE = 3
_STREAM_VAL = 4


def train(net, dataset, cfg, trace_callback=None):
    """Optimize the network on the dataset's train split.

    The train split is z-score normalized (statistics from the gradient
    points only, after the validation carve-out) and those statistics are
    attached to the network for checkpointing. Validation rows in the
    trace report NMSE and mean negative log-likelihood in original units;
    with no validation carve they are NaN.

    Raises TrainingError (with iteration index and partial trace) on a
    non-finite loss or gradient.
    """
    from .model import rng_stream

    cfg.validate()
    x_all, y_all = dataset.split_arrays("train")
    n_all = x_all.shape[0]
    if n_all < 2:
        raise ParameterError("train: need at least two training points")

    n_val = int(round(cfg.validation_fraction * n_all))
    if n_val > 0:
        val_gen = rng_stream(cfg.seed, _STREAM_VAL)
        perm = val_gen.permutation(n_all)
        val_idx, train_idx = perm[:n_val], perm[n_val:]
    else:
        val_idx, train_idx = np.empty(0, dtype=np.intp), np.arange(n_all)
    x_train, y_train = x_all[train_idx], y_all[train_idx]
    x_val, y_val = x_all[val_idx], y_all[val_idx]
    n_train = x_train.shape[0]

    norm = Normalization.fit(x_train, y_train, x_mode=cfg.input_normalization)
    net.normalization = norm.to_dict()
    xn = norm.normalize_x(x_train)
    yn = norm.normalize_y(y_train)
    xn_val = norm.normalize_x(x_val) if n_val else None

    params = net.parameters()
    opt = AdamW(
        params,
        lr=cfg.learning_rate,
        betas=cfg.betas,
        eps=cfg.adam_eps,
        weight_decay=cfg.weight_decay,
        exempt=net.hyperparameter_names(),
    )
    shuffle_gen = rng_stream(cfg.seed, _STREAM_SHUFFLE)
    batch = min(cfg.batch_size, n_train)

    def validation_metrics():
        if not n_val:
            return float("nan"), float("nan")
        mean_n, var_n = net.predict(xn_val)
        mean = norm.denormalize_mean(mean_n)
        var = norm.denormalize_var(var_n)
        return (
            float(np.mean(nmse(y_val, mean))),
            float(np.mean(mnll(y_val, mean, var))),
        )

    result = TrainResult(normalization=norm)
    start = time.time()
    order = np.empty(0, dtype=np.intp)
    cursor = 0
    last_elbo = float("nan")
    for it in range(cfg.max_iterations):
        if cursor + batch > len(order):
            order = shuffle_gen.permutation(n_train)
            cursor = 0
        idx = order[cursor:cursor + batch]
        cursor += batch

        opt.zero_grad()
        elbo = elbo_estimate(net, xn[idx], yn[idx], n_train)
        value = elbo.item()
        if not np.isfinite(value):
            raise TrainingError(
                f"non-finite ELBO at iteration {it}",
                iteration=it, trace=result.trace,
            )
        loss = ad.neg(elbo)
        loss.backward()
        for name, p in params.items():
            if p.grad is not None and not np.isfinite(p.grad).all():
                raise TrainingError(
                    f"non-finite gradient for {name!r} at iteration {it}",
                    iteration=it, trace=result.trace,
                )
        opt.step()
        last_elbo = value

        if it % cfg.log_every == 0 or it == cfg.max_iterations - 1:
            val_nmse, val_mnll = validation_metrics()
            row = TraceRow(it, value, val_nmse, val_mnll)
            result.trace.append(row)
            if trace_callback is not None:
                trace_callback(row)

    result.final_elbo = last_elbo
    result.n_iterations = cfg.max_iterations
    result.wall_time_s = time.time() - start
    return result
