"""Deep latent force networks built from random response features.

Each layer approximates a Gaussian process in weight space: it maps its
input through a random feature expansion (either the ODE response
features of :mod:`deeplfm.features` or plain exponentiated-quadratic
Fourier features) and multiplies by a weight matrix. Both the spectral
frequencies and the weights carry mean-field Gaussian variational
posteriors, reparameterized as ``value = exp(raw/2) * eps + mean``
against a bank of standard-normal draws that is fixed when the network is
built and never resampled. Stacking layers composes the processes into a
deep regression model; optional skip connections concatenate the original
input onto each hidden layer's output, so every layer after the first
(including the per-output units) maps a ``width + input_dim``-dimensional
input through its own feature expansion. Routing the raw input through
the next layer's bounded feature map, rather than splicing it linearly
into the outputs, is what keeps deep compositions from degenerating.

The Monte Carlo dimension is folded into the row axis: a forward pass
over ``R`` posterior samples and ``N`` points works on ``(R*N, ...)``
tensors with per-sample parameter blocks, which keeps graphs small and
the heavy work inside vectorized kernels.

All positive hyperparameters (decays, lengthscales, kernel variances,
likelihood noise) are stored as unconstrained values mapped through
softplus; variational variances are stored as log-variance.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ForwardError, ParameterError
from .features import rfrf_features, rfrf_scale_row

CHECKPOINT_VERSION = 1

# spawn keys for the independent random streams derived from one seed
_STREAM_INIT = 0
_STREAM_EPS = 1
_STREAM_EPS_EXT = 2


def rng_stream(seed, key):
    """Independent generator derived from (seed, stream key)."""
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(key,)))
    )


def softplus_inverse(y):
    if y <= 0:
        raise ParameterError(f"softplus_inverse: need y > 0, got {y}")
    # log(exp(y) - 1), stable for small y
    return float(y + np.log(-np.expm1(-y)))


@dataclass
class LayerSpec:
    """Architecture of one layer: width is the layer's output dimension."""

    width: int
    q: int = 1
    n_rf: int = 100
    kind: str = "rfrf"

    def validate(self):
        if self.width < 1 or self.q < 1 or self.n_rf < 1:
            raise ParameterError(
                f"LayerSpec: width={self.width}, q={self.q}, n_rf={self.n_rf} "
                "must all be >= 1"
            )
        if self.kind not in ("rfrf", "eq"):
            raise ParameterError(f"LayerSpec: unknown kind {self.kind!r}")


@dataclass
class NetworkConfig:
    """Full architecture description, serializable for checkpoints."""

    input_dim: int
    output_dim: int
    hidden: list = field(default_factory=list)  # list[LayerSpec], widths exclude skip
    output: LayerSpec = None                    # width ignored, one unit per output
    skip: bool = True
    n_mc: int = 100
    noise_init: float = 0.01
    hidden_ls_init: float = 0.01
    output_ls_init: float = 1.0
    gamma_init: float = 0.01
    eq_variance_init: float = 1.0
    rfrf_prior: str = "bochner"  # omega ~ N(0, 2/l^2); "inverse_square" uses 1/l^2

    def validate(self):
        if self.input_dim < 1 or self.output_dim < 1:
            raise ParameterError("NetworkConfig: input_dim and output_dim must be >= 1")
        if self.n_mc < 1:
            raise ParameterError("NetworkConfig: n_mc must be >= 1")
        if self.rfrf_prior not in ("bochner", "inverse_square"):
            raise ParameterError(
                f"NetworkConfig: unknown rfrf_prior {self.rfrf_prior!r}"
            )
        if self.output is None:
            raise ParameterError("NetworkConfig: output layer spec is required")
        for spec in self.hidden:
            spec.validate()
        self.output.validate()
        for value, name in (
            (self.noise_init, "noise_init"),
            (self.hidden_ls_init, "hidden_ls_init"),
            (self.output_ls_init, "output_ls_init"),
            (self.gamma_init, "gamma_init"),
            (self.eq_variance_init, "eq_variance_init"),
        ):
            if value <= 0:
                raise ParameterError(f"NetworkConfig: {name} must be positive")

    def to_dict(self):
        return {
            "input_dim": self.input_dim,
            "output_dim": self.output_dim,
            "hidden": [
                {"width": s.width, "q": s.q, "n_rf": s.n_rf, "kind": s.kind}
                for s in self.hidden
            ],
            "output": {
                "width": self.output.width,
                "q": self.output.q,
                "n_rf": self.output.n_rf,
                "kind": self.output.kind,
            },
            "skip": self.skip,
            "n_mc": self.n_mc,
            "noise_init": self.noise_init,
            "hidden_ls_init": self.hidden_ls_init,
            "output_ls_init": self.output_ls_init,
            "gamma_init": self.gamma_init,
            "eq_variance_init": self.eq_variance_init,
            "rfrf_prior": self.rfrf_prior,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            input_dim=int(d["input_dim"]),
            output_dim=int(d["output_dim"]),
            hidden=[LayerSpec(**h) for h in d["hidden"]],
            output=LayerSpec(**d["output"]),
            skip=bool(d["skip"]),
            n_mc=int(d["n_mc"]),
            noise_init=float(d["noise_init"]),
            hidden_ls_init=float(d["hidden_ls_init"]),
            output_ls_init=float(d["output_ls_init"]),
            gamma_init=float(d["gamma_init"]),
            eq_variance_init=float(d["eq_variance_init"]),
            rfrf_prior=str(d["rfrf_prior"]),
        )


class ResponseLayer:
    """One weight-space GP layer (also used per output dimension).

    ``scale_param`` is the tensor controlling the feature amplitude: for
    response features the (1, q) sensitivities S_q (shared across outputs
    at the output layer), for EQ features the unconstrained kernel
    variance. It is owned by the network, not the layer, so it can be
    shared.
    """

    def __init__(self, in_dim, out_dim, spec, scale_param,
                 ls_init, gamma_init, prior_mode, init_gen):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.q = spec.q
        self.n_rf = spec.n_rf
        self.kind = spec.kind
        self.scale_param = scale_param
        self.prior_mode = prior_mode

        p = in_dim
        if self.kind == "rfrf":
            k = self.q * self.n_rf
            self.gamma_raw = Tensor(
                np.full(p, softplus_inverse(gamma_init)), requires_grad=True
            )
            self.ls_raw = Tensor(
                np.full((p, self.q), softplus_inverse(ls_init)), requires_grad=True
            )
            prior_std = (np.sqrt(2.0) if prior_mode == "bochner" else 1.0) / ls_init
        else:
            k = self.n_rf
            self.gamma_raw = None
            self.ls_raw = Tensor(
                np.full((p, 1), softplus_inverse(ls_init)), requires_grad=True
            )
            prior_std = 1.0 / ls_init
        self.k = k

        self.omega_mean = Tensor(
            init_gen.normal(0.0, prior_std, size=(p, k)), requires_grad=True
        )
        self.omega_raw = Tensor(np.full((p, k), -5.0), requires_grad=True)

        w_in = self.feature_width
        self.w_mean = Tensor(
            init_gen.standard_normal((w_in, out_dim)), requires_grad=True
        )
        self.w_raw = Tensor(np.full((w_in, out_dim), -5.0), requires_grad=True)

        self.eps_omega = None  # (n_mc, p, k), set by the network
        self.eps_w = None      # (n_mc, w_in, out_dim)

    @property
    def feature_width(self):
        return 2 * self.k if self.kind == "rfrf" else 2 * self.n_rf

    def set_eps(self, eps_omega, eps_w):
        self.eps_omega = eps_omega
        self.eps_w = eps_w

    def parameters(self):
        params = {
            "omega_mean": self.omega_mean,
            "omega_raw": self.omega_raw,
            "w_mean": self.w_mean,
            "w_raw": self.w_raw,
            "ls_raw": self.ls_raw,
        }
        if self.gamma_raw is not None:
            params["gamma_raw"] = self.gamma_raw
        return params

    # -- sampling -----------------------------------------------------------

    def _stacked_omega(self, eps):
        r = eps.shape[0]
        std = ad.exp(ad.mul(self.omega_raw, 0.5))
        eps_flat = Tensor(eps.reshape(r * self.in_dim, self.k))
        return ad.add(
            ad.mul(ad.tile_rows(std, r), eps_flat),
            ad.tile_rows(self.omega_mean, r),
        )

    def _stacked_weights(self, eps):
        r = eps.shape[0]
        w_in = self.w_mean.data.shape[0]
        std = ad.exp(ad.mul(self.w_raw, 0.5))
        eps_flat = Tensor(eps.reshape(r * w_in, self.out_dim))
        return ad.add(
            ad.mul(ad.tile_rows(std, r), eps_flat),
            ad.tile_rows(self.w_mean, r),
        )

    def features(self, f, eps_omega, r):
        """Scaled stacked feature matrix (r*n, feature_width)."""
        omega = self._stacked_omega(eps_omega)
        if self.kind == "rfrf":
            gamma = ad.softplus(self.gamma_raw)
            scale = rfrf_scale_row(self.scale_param, self.n_rf)
            return rfrf_features(f, gamma, omega, r, scale=scale)
        u = ad.block_matmul(f, omega, r)
        feats = ad.trig_pair(u)
        scale = ad.sqrt(ad.div(ad.softplus(self.scale_param), float(self.n_rf)))
        return ad.mul(feats, scale)

    def apply(self, f, eps_omega, eps_w, r):
        """Layer output (r*n, out_dim)."""
        feats = self.features(f, eps_omega, r)
        weights = self._stacked_weights(eps_w)
        return ad.block_matmul(feats, weights, r)

    def sample_parameters(self, mc_index):
        """Concrete (omega, weights) arrays for one bank entry."""
        if mc_index < 0 or mc_index >= self.eps_omega.shape[0]:
            raise ParameterError(
                f"sample_parameters: mc_index {mc_index} outside bank of "
                f"{self.eps_omega.shape[0]}"
            )
        with ad.no_grad():
            omega = (
                np.exp(0.5 * self.omega_raw.data) * self.eps_omega[mc_index]
                + self.omega_mean.data
            )
            weights = (
                np.exp(0.5 * self.w_raw.data) * self.eps_w[mc_index]
                + self.w_mean.data
            )
        return omega, weights

    # -- prior and divergence -------------------------------------------------

    def omega_prior_variance(self):
        """Per-coordinate prior variance of the frequencies, (p, k) Tensor."""
        ls = ad.softplus(self.ls_raw)
        if self.kind == "rfrf":
            numer = 2.0 if self.prior_mode == "bochner" else 1.0
        else:
            numer = 1.0
        per_block = ad.div(numer, ad.square(ls))
        return ad.repeat_cols(per_block, self.n_rf)

    def kl(self):
        from .training import kl_diag_normal

        omega_kl = kl_diag_normal(
            self.omega_mean, self.omega_raw, 0.0, self.omega_prior_variance()
        )
        w_kl = kl_diag_normal(self.w_mean, self.w_raw, 0.0, None)
        return ad.add(omega_kl, w_kl)


class DLFMNetwork:
    """A stack of response-feature layers with fixed reparameterization banks."""

    def __init__(self, config, seed):
        config.validate()
        self.config = config
        self.seed = int(seed)
        self.n_mc = config.n_mc

        init_gen = rng_stream(self.seed, _STREAM_INIT)
        self.hidden = []
        self.hidden_scales = []
        skip_width = config.input_dim if config.skip else 0

        in_dim = config.input_dim
        for spec in config.hidden:
            scale = self._make_scale_param(spec, init_gen)
            layer = ResponseLayer(
                in_dim, spec.width, spec, scale,
                config.hidden_ls_init, config.gamma_init, config.rfrf_prior,
                init_gen,
            )
            self.hidden.append(layer)
            self.hidden_scales.append(scale)
            # the next layer sees this output with the raw input appended
            in_dim = spec.width + skip_width

        out_spec = config.output
        if out_spec.kind == "rfrf":
            self.output_scale = self._make_scale_param(out_spec, init_gen)
            self.output_unit_scales = None
        else:
            self.output_scale = None
            self.output_unit_scales = [
                self._make_scale_param(out_spec, init_gen)
                for _ in range(config.output_dim)
            ]
        self.output_units = []
        for d in range(config.output_dim):
            scale = (
                self.output_scale
                if out_spec.kind == "rfrf"
                else self.output_unit_scales[d]
            )
            self.output_units.append(
                ResponseLayer(
                    in_dim, 1, out_spec, scale,
                    config.output_ls_init, config.gamma_init,
                    config.rfrf_prior, init_gen,
                )
            )

        self.noise_raw = Tensor(
            np.full((1, config.output_dim), softplus_inverse(config.noise_init)),
            requires_grad=True,
        )

        self._draw_eps_banks()
        self._ext_gen = None
        self._ext_count = 0
        self._ext = {}
        self.normalization = None

    def _make_scale_param(self, spec, init_gen):
        if spec.kind == "rfrf":
            return Tensor(
                init_gen.standard_normal((1, spec.q)), requires_grad=True
            )
        return Tensor(
            np.asarray(softplus_inverse(self.config.eq_variance_init)),
            requires_grad=True,
        )

    def _all_layers(self):
        return list(self.hidden) + list(self.output_units)

    def _draw_eps_banks(self):
        gen = rng_stream(self.seed, _STREAM_EPS)
        for layer in self._all_layers():
            p, k = layer.in_dim, layer.k
            w_in = layer.w_mean.data.shape[0]
            eps_omega = gen.standard_normal((self.n_mc, p, k))
            eps_w = gen.standard_normal((self.n_mc, w_in, layer.out_dim))
            layer.set_eps(eps_omega, eps_w)

    # -- parameter registry ----------------------------------------------------

    def parameters(self):
        """Stable name -> Tensor mapping over all trainable parameters."""
        params = {}
        for i, layer in enumerate(self.hidden):
            for name, tensor in layer.parameters().items():
                params[f"hidden.{i}.{name}"] = tensor
            params[f"hidden.{i}.scale"] = self.hidden_scales[i]
        for d, unit in enumerate(self.output_units):
            for name, tensor in unit.parameters().items():
                params[f"output.{d}.{name}"] = tensor
            if self.output_unit_scales is not None:
                params[f"output.{d}.scale"] = self.output_unit_scales[d]
        if self.output_scale is not None:
            params["output.scale"] = self.output_scale
        params["noise_raw"] = self.noise_raw
        return params

    def hyperparameter_names(self):
        """Kernel hyperparameters and likelihood noise: exempt from weight
        decay during optimization."""
        names = set()
        for name in self.parameters():
            leaf = name.rsplit(".", 1)[-1]
            if leaf in ("gamma_raw", "ls_raw", "scale") or name == "noise_raw":
                names.add(name)
        return names

    # -- forward passes ----------------------------------------------------------

    def _bank_slices(self, mc_indices):
        mc_indices = np.asarray(mc_indices, dtype=np.intp)
        slices = []
        for layer in self._all_layers():
            eo, ew = self._eps_for(layer, mc_indices)
            slices.append((eo, ew))
        return mc_indices, slices

    def _eps_for(self, layer, mc_indices):
        in_bank = mc_indices < self.n_mc
        if in_bank.all():
            return layer.eps_omega[mc_indices], layer.eps_w[mc_indices]
        self._grow_extension(int(mc_indices.max()) + 1)
        key = id(layer)
        ext_o, ext_w = self._ext[key]
        eo = np.concatenate([layer.eps_omega, ext_o], axis=0)[mc_indices]
        ew = np.concatenate([layer.eps_w, ext_w], axis=0)[mc_indices]
        return eo, ew

    def _grow_extension(self, total):
        """Extend the draw bank deterministically past its built size.

        Draws are sample-major so any prefix is stable regardless of how
        far the extension has grown.
        """
        needed = total - self.n_mc
        if needed <= self._ext_count:
            return
        if self._ext_gen is None:
            self._ext_gen = rng_stream(self.seed, _STREAM_EPS_EXT)
            for layer in self._all_layers():
                p, k = layer.in_dim, layer.k
                w_in = layer.w_mean.data.shape[0]
                self._ext[id(layer)] = (
                    np.zeros((0, p, k)),
                    np.zeros((0, w_in, layer.out_dim)),
                )
        for _ in range(needed - self._ext_count):
            for layer in self._all_layers():
                p, k = layer.in_dim, layer.k
                w_in = layer.w_mean.data.shape[0]
                eo, ew = self._ext[id(layer)]
                new_o = self._ext_gen.standard_normal((1, p, k))
                new_w = self._ext_gen.standard_normal((1, w_in, layer.out_dim))
                self._ext[id(layer)] = (
                    np.concatenate([eo, new_o], axis=0),
                    np.concatenate([ew, new_w], axis=0),
                )
        self._ext_count = needed

    def forward_stacked(self, x, mc_indices, check_finite=False,
                        collect_activations=False):
        """Stacked forward pass.

        x: (n, input_dim) array of (normalized) inputs.
        mc_indices: which bank entries to run, length r.
        Returns the mean Tensor (r*n, output_dim); with
        ``collect_activations`` also a list of per-layer output arrays.
        """
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.config.input_dim:
            raise ParameterError(
                f"forward: expected (n, {self.config.input_dim}) inputs, "
                f"got {x.shape}"
            )
        mc_indices, slices = self._bank_slices(mc_indices)
        r = len(mc_indices)
        x_tile = Tensor(np.tile(x, (r, 1)))

        activations = []
        f = x_tile
        for i, layer in enumerate(self.hidden):
            eo, ew = slices[i]
            f = layer.apply(f, eo, ew, r)
            if check_finite and not np.isfinite(f.data).all():
                raise ForwardError(
                    f"non-finite activation in hidden layer {i}", layer_index=i
                )
            if collect_activations:
                activations.append(f.data)
            if self.config.skip:
                f = ad.concat([f, x_tile], axis=1)

        cols = []
        for d, unit in enumerate(self.output_units):
            eo, ew = slices[len(self.hidden) + d]
            cols.append(unit.apply(f, eo, ew, r))
        mean = ad.concat(cols, axis=1) if len(cols) > 1 else cols[0]
        if check_finite and not np.isfinite(mean.data).all():
            raise ForwardError(
                "non-finite activation in output layer",
                layer_index=len(self.hidden),
            )
        if collect_activations:
            activations.append(mean.data)
            return mean, activations
        return mean

    def forward_sample(self, x, mc_index):
        """Deterministic single-sample forward pass.

        Returns (output (n, output_dim), list of per-layer activations).
        """
        with ad.no_grad():
            mean, acts = self.forward_stacked(
                x, [mc_index], check_finite=True, collect_activations=True
            )
        return mean.data, acts

    def noise_variance(self):
        return ad.softplus(self.noise_raw)

    def predict(self, x, n_mc=None):
        """Monte Carlo predictive mean and variance, both (n, output_dim).

        The variance is the population variance of the sampled means plus
        the likelihood noise. Samples come from the fixed bank (extended
        deterministically past its size), so predictions are reproducible
        and, for n_mc up to the bank size, use exactly the bank prefix.
        """
        x = np.asarray(x, dtype=np.float64)
        if n_mc is None:
            n_mc = self.n_mc
        if n_mc < 1:
            raise ParameterError(f"predict: n_mc must be >= 1, got {n_mc}")
        n = x.shape[0]
        d = self.config.output_dim
        width = max(
            (l.feature_width for l in self._all_layers()), default=1
        )
        # keep the largest stacked buffer around 50M float64 elements
        chunk = max(1, int(50_000_000 / max(1, n * width)))
        # accumulate deviations from the first sample so identical samples
        # give exactly zero Monte Carlo variance
        pivot = None
        total_dev = np.zeros((n, d))
        total_dev_sq = np.zeros((n, d))
        done = 0
        with ad.no_grad():
            while done < n_mc:
                take = min(chunk, n_mc - done)
                idx = np.arange(done, done + take)
                mean = self.forward_stacked(x, idx, check_finite=True)
                m3 = mean.data.reshape(take, n, d)
                if pivot is None:
                    pivot = m3[0].copy()
                dev = m3 - pivot
                total_dev += dev.sum(axis=0)
                total_dev_sq += np.square(dev).sum(axis=0)
                done += take
            mean_dev = total_dev / n_mc
            mc_mean = pivot + mean_dev
            mc_var = np.maximum(
                total_dev_sq / n_mc - np.square(mean_dev), 0.0
            )
            var = mc_var + ad.softplus(self.noise_raw).data
        return mc_mean, var

    # -- divergence ------------------------------------------------------------

    def kl_divergence(self):
        """KL from the variational posterior to the prior, summed over all
        frequency and weight coordinates of every layer."""
        total = None
        for layer in self._all_layers():
            term = layer.kl()
            total = term if total is None else ad.add(total, term)
        return total

    # -- persistence -------------------------------------------------------------

    def save(self, path):
        arrays = {
            "__format_version__": np.asarray(CHECKPOINT_VERSION),
            "__arch__": np.asarray(json.dumps(self.config.to_dict())),
            "__seed__": np.asarray(self.seed),
        }
        for name, tensor in self.parameters().items():
            arrays[f"param.{name}"] = tensor.data
        if self.normalization is not None:
            for key, value in self.normalization.items():
                arrays[f"norm.{key}"] = np.asarray(value, dtype=np.float64)
        np.savez(path, **arrays)

    @classmethod
    def load(cls, path):
        with np.load(path, allow_pickle=False) as data:
            version = int(data["__format_version__"])
            if version != CHECKPOINT_VERSION:
                raise ParameterError(
                    f"checkpoint format version {version} not supported"
                )
            config = NetworkConfig.from_dict(json.loads(str(data["__arch__"])))
            seed = int(data["__seed__"])
            net = cls(config, seed)
            params = net.parameters()
            for key in data.files:
                if key.startswith("param."):
                    name = key[len("param."):]
                    if name not in params:
                        raise ParameterError(
                            f"checkpoint parameter {name!r} does not match "
                            "the stored architecture"
                        )
                    if params[name].data.shape != data[key].shape:
                        raise ParameterError(
                            f"checkpoint parameter {name!r} has shape "
                            f"{data[key].shape}, expected "
                            f"{params[name].data.shape}"
                        )
                    params[name].data = np.asarray(data[key], dtype=np.float64)
            norm_keys = [k for k in data.files if k.startswith("norm.")]
            if norm_keys:
                net.normalization = {
                    k[len("norm."):]: np.asarray(data[k]) for k in norm_keys
                }
        return net
