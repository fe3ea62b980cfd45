"""Variational objective, closed-form KL, AdamW, and the training loop."""

import numpy as np
import pytest

from deeplfm import autodiff as ad
from deeplfm.autodiff import Tensor
from deeplfm.dynamics import generate_toy
from deeplfm.errors import ParameterError, TrainingError
from deeplfm.model import DLFMNetwork, LayerSpec, NetworkConfig
from deeplfm.training import (
    AdamW,
    TrainConfig,
    elbo_estimate,
    gaussian_log_likelihood,
    kl_diag_normal,
    train,
)


def tiny_net(seed=0, n_mc=4, n_rf=3, kind="rfrf"):
    cfg = NetworkConfig(
        input_dim=1, output_dim=1,
        hidden=[LayerSpec(width=2, q=1, n_rf=n_rf, kind=kind)],
        output=LayerSpec(width=1, q=1, n_rf=n_rf, kind=kind),
        skip=True, n_mc=n_mc,
    )
    return DLFMNetwork(cfg, seed=seed)


# -- closed-form KL ------------------------------------------------------------


def test_kl_standard_case_is_exactly_half():
    kl = kl_diag_normal(Tensor(np.array([1.0])), Tensor(np.array([0.0])),
                        0.0, None)
    assert float(kl.data) == 0.5


def test_kl_zero_when_posterior_equals_prior():
    kl = kl_diag_normal(Tensor(np.zeros((3, 2))), Tensor(np.zeros((3, 2))),
                        0.0, None)
    assert float(kl.data) == 0.0
    raw = 0.4
    kl2 = kl_diag_normal(
        Tensor(np.full((2, 2), 0.3)), Tensor(np.full((2, 2), raw)),
        0.3, Tensor(np.full((2, 2), np.exp(raw))),
    )
    assert abs(float(kl2.data)) < 1e-13


def test_kl_nonnegative_over_random_instances():
    gen = np.random.default_rng(0)
    for _ in range(50):
        shape = (gen.integers(1, 4), gen.integers(1, 5))
        kl = kl_diag_normal(
            Tensor(gen.normal(0, 3, shape)),
            Tensor(gen.normal(0, 2, shape)),
            float(gen.normal(0, 2)),
            Tensor(np.exp(gen.normal(0, 2, shape))),
        )
        assert float(kl.data) >= 0.0


def test_kl_matches_monte_carlo_estimate():
    gen = np.random.default_rng(7)
    for _ in range(5):
        mq = gen.normal(0, 1.5, 3)
        raw = gen.normal(0, 1, 3)
        mp = float(gen.normal(0, 1))
        vp = np.exp(gen.normal(0, 1, 3))
        kl = float(kl_diag_normal(Tensor(mq), Tensor(raw), mp,
                                  Tensor(vp)).data)
        sq = np.exp(0.5 * raw)
        z = mq + sq * gen.standard_normal((200000, 3))
        log_q = -0.5 * (np.log(2 * np.pi) + raw + ((z - mq) / sq) ** 2)
        log_p = -0.5 * (np.log(2 * np.pi * vp) + (z - mp) ** 2 / vp)
        diffs = (log_q - log_p).sum(axis=1)
        se = diffs.std() / np.sqrt(len(diffs))
        assert abs(kl - diffs.mean()) < 5 * se + 1e-3


def test_kl_gradients_match_finite_differences():
    gen = np.random.default_rng(1)
    mean = Tensor(gen.normal(0, 1, (2, 3)), requires_grad=True)
    raw = Tensor(gen.normal(0, 0.5, (2, 3)), requires_grad=True)
    prior_var = Tensor(np.exp(gen.normal(0, 0.5, (2, 3))),
                       requires_grad=True)

    def f():
        return kl_diag_normal(mean, raw, 0.2, prior_var)

    worst = ad.gradient_check(f, [mean, raw, prior_var])
    assert worst < 1e-5


# -- Gaussian log likelihood ---------------------------------------------------


def test_log_likelihood_reference_values():
    y = np.zeros((1, 1))
    mean = Tensor(np.zeros((1, 1)))
    var = Tensor(np.ones((1, 1)))
    ll = gaussian_log_likelihood(y, mean, var)
    assert np.isclose(float(ll.data), -0.5 * np.log(2 * np.pi), rtol=1e-14)
    ll2 = gaussian_log_likelihood(np.ones((1, 1)), mean, var)
    assert np.isclose(float(ll2.data), -0.5 * np.log(2 * np.pi) - 0.5,
                      rtol=1e-14)


def test_log_likelihood_additive_over_rows():
    gen = np.random.default_rng(3)
    y = gen.normal(0, 1, (3, 2))
    mean_data = gen.normal(0, 1, (3, 2))
    var_data = np.exp(gen.normal(0, 0.3, (1, 2)))
    total = gaussian_log_likelihood(y, Tensor(mean_data), Tensor(var_data))
    singles = sum(
        float(gaussian_log_likelihood(y[i:i + 1], Tensor(mean_data[i:i + 1]),
                                      Tensor(var_data)).data)
        for i in range(3)
    )
    assert np.isclose(float(total.data), singles, rtol=1e-12)


def test_log_likelihood_gradients():
    gen = np.random.default_rng(4)
    y = gen.normal(0, 1, (4, 2))
    mean = Tensor(gen.normal(0, 1, (4, 2)), requires_grad=True)
    var = Tensor(np.exp(gen.normal(0, 0.3, (1, 2))), requires_grad=True)

    def f():
        return gaussian_log_likelihood(y, mean, var)

    assert ad.gradient_check(f, [mean, var]) < 1e-5


# -- ELBO ----------------------------------------------------------------------


def test_elbo_likelihood_term_scales_with_population_size():
    net = tiny_net()
    gen = np.random.default_rng(0)
    x = gen.uniform(0, 1, (6, 1))
    y = gen.normal(0, 1, (6, 1))
    kl = float(net.kl_divergence().data)
    e1 = float(elbo_estimate(net, x, y, n_total=6).data)
    e2 = float(elbo_estimate(net, x, y, n_total=12).data)
    assert np.isclose(e2 + kl, 2.0 * (e1 + kl), rtol=1e-10)


def test_elbo_reduces_to_scaled_likelihood_when_posterior_is_prior():
    net = tiny_net(seed=5)
    for layer in net._all_layers():
        layer.omega_mean.data[:] = 0.0
        layer.omega_raw.data[:] = np.log(layer.omega_prior_variance().data)
        layer.w_mean.data[:] = 0.0
        layer.w_raw.data[:] = 0.0
    assert abs(float(net.kl_divergence().data)) < 1e-10

    gen = np.random.default_rng(1)
    x = gen.uniform(0, 1, (5, 1))
    y = gen.normal(0, 1, (5, 1))
    r = net.n_mc
    mean = net.forward_stacked(x, np.arange(r))
    ll = gaussian_log_likelihood(np.tile(y, (r, 1)), mean,
                                 net.noise_variance())
    elbo = elbo_estimate(net, x, y, n_total=5)
    assert np.isclose(float(elbo.data), float(ll.data) / r, rtol=1e-10)


def test_elbo_rejects_empty_batch():
    net = tiny_net()
    with pytest.raises(ParameterError):
        elbo_estimate(net, np.zeros((0, 1)), np.zeros((0, 1)), n_total=5)


# -- AdamW ---------------------------------------------------------------------


def test_adamw_zero_gradient_zero_decay_is_identity():
    p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    before = p.data.copy()
    opt = AdamW({"p": p}, lr=0.1, weight_decay=0.0)
    p.grad = np.zeros(2)
    opt.step()
    assert np.array_equal(p.data, before)


def test_adamw_first_step_size_is_learning_rate():
    p = Tensor(np.array([5.0]), requires_grad=True)
    opt = AdamW({"p": p}, lr=0.01, weight_decay=0.0)
    p.grad = np.array([3.0])
    opt.step()
    assert np.isclose(5.0 - p.data[0], 0.01, rtol=1e-6)
    # direction follows the gradient sign
    q = Tensor(np.array([5.0]), requires_grad=True)
    opt2 = AdamW({"q": q}, lr=0.01, weight_decay=0.0)
    q.grad = np.array([-3.0])
    opt2.step()
    assert np.isclose(q.data[0] - 5.0, 0.01, rtol=1e-6)


def test_adamw_zero_lr_freezes_everything():
    p = Tensor(np.array([1.5]), requires_grad=True)
    q = Tensor(np.array([-0.5]), requires_grad=True)
    opt = AdamW({"p": p, "q": q}, lr=0.0, weight_decay=0.5, exempt={"q"})
    for _ in range(3):
        p.grad = np.array([2.0])
        q.grad = np.array([2.0])
        opt.step()
    assert p.data[0] == 1.5 and q.data[0] == -0.5


def test_adamw_decay_skips_exempt_parameters():
    p = Tensor(np.array([1.0]), requires_grad=True)
    q = Tensor(np.array([1.0]), requires_grad=True)
    opt = AdamW({"p": p, "q": q}, lr=0.1, weight_decay=0.3, exempt={"q"})
    p.grad = np.zeros(1)
    q.grad = np.zeros(1)
    opt.step()
    assert np.isclose(p.data[0], 1.0 - 0.1 * 0.3 * 1.0, rtol=1e-12)
    assert q.data[0] == 1.0


def test_adamw_requires_gradients():
    p = Tensor(np.array([1.0]), requires_grad=True)
    opt = AdamW({"p": p}, lr=0.1)
    with pytest.raises(TrainingError):
        opt.step()


def test_adamw_rejects_negative_rates():
    p = Tensor(np.array([1.0]), requires_grad=True)
    with pytest.raises(ParameterError):
        AdamW({"p": p}, lr=-0.1)


def test_adamw_converges_on_quadratic():
    target = np.array([0.3, -1.2, 2.0])
    p = Tensor(np.zeros(3), requires_grad=True)
    opt = AdamW({"p": p}, lr=0.01, weight_decay=0.0)
    for _ in range(2000):
        opt.zero_grad()
        loss = ad.tensor_sum(ad.square(ad.sub(p, target)))
        loss.backward()
        opt.step()
    assert np.max(np.abs(p.data - target)) < 1e-3


# -- training loop -------------------------------------------------------------


def toy_subset(n=60, seed=0):
    series = generate_toy(seed=seed, n_grid=n, n_interp=5, n_extrap=5)
    return series.to_dataset()


def test_train_zero_iterations_changes_nothing():
    net = tiny_net()
    before = {n: t.data.copy() for n, t in net.parameters().items()}
    ds = toy_subset()
    result = train(net, ds, TrainConfig(max_iterations=0, seed=0))
    assert result.n_iterations == 0 and result.trace == []
    assert np.isnan(result.final_elbo)
    for name, t in net.parameters().items():
        assert np.array_equal(t.data, before[name]), name
    assert net.normalization is not None


def test_train_zero_learning_rate_changes_nothing():
    net = tiny_net()
    before = {n: t.data.copy() for n, t in net.parameters().items()}
    cfg = TrainConfig(max_iterations=3, learning_rate=0.0,
                      validation_fraction=0.0, seed=0)
    train(net, toy_subset(), cfg)
    for name, t in net.parameters().items():
        assert np.array_equal(t.data, before[name]), name


def test_train_improves_elbo():
    net = tiny_net(seed=1)
    cfg = TrainConfig(max_iterations=60, batch_size=100,
                      validation_fraction=0.0, log_every=10, seed=1)
    result = train(net, toy_subset(), cfg)
    assert result.final_elbo > result.trace[0].elbo
    assert result.n_iterations == 60
    assert result.wall_time_s > 0.0


def test_train_trace_layout_and_validation_metrics():
    net = tiny_net(seed=2)
    cfg = TrainConfig(max_iterations=25, batch_size=16, log_every=10,
                      validation_fraction=0.2, seed=2)
    rows = []
    result = train(net, toy_subset(), cfg, trace_callback=rows.append)
    assert [r.iteration for r in result.trace] == [0, 10, 20, 24]
    assert rows == result.trace
    for row in result.trace:
        assert np.isfinite(row.elbo)
        assert np.isfinite(row.val_nmse) and np.isfinite(row.val_mnll)


def test_train_without_validation_reports_nan_metrics():
    net = tiny_net(seed=3)
    cfg = TrainConfig(max_iterations=2, validation_fraction=0.0,
                      log_every=1, seed=3)
    result = train(net, toy_subset(), cfg)
    assert all(np.isnan(r.val_nmse) and np.isnan(r.val_mnll)
               for r in result.trace)


def test_train_is_deterministic():
    cfg = TrainConfig(max_iterations=8, batch_size=16,
                      validation_fraction=0.1, seed=4)
    nets = []
    for _ in range(2):
        net = tiny_net(seed=4)
        train(net, toy_subset(), cfg)
        nets.append(net)
    for name, t in nets[0].parameters().items():
        assert np.array_equal(t.data, nets[1].parameters()[name].data), name


def test_train_aborts_on_non_finite_loss():
    net = tiny_net(seed=5)
    net.hidden[0].w_mean.data[:] = 1e200
    cfg = TrainConfig(max_iterations=5, validation_fraction=0.0, seed=5)
    with pytest.raises(TrainingError) as err, np.errstate(all="ignore"):
        train(net, toy_subset(), cfg)
    assert err.value.iteration == 0
    assert err.value.trace == []


def test_train_config_validation():
    with pytest.raises(ParameterError):
        TrainConfig(max_iterations=-1).validate()
    with pytest.raises(ParameterError):
        TrainConfig(batch_size=0).validate()
    with pytest.raises(ParameterError):
        TrainConfig(validation_fraction=1.0).validate()
    with pytest.raises(ParameterError):
        TrainConfig(log_every=0).validate()
