"""Random Fourier features for first-order ODE response kernels.

A latent force with decay ``gamma`` driven by a stationary process turns
each Fourier basis function ``exp(j*omega*t)`` into the response

    phi(t, gamma, omega) = (exp(j*omega*t) - exp(-gamma*t)) / (gamma + j*omega),

the convolution of the basis with the Green's function of
``df/dt = -gamma*f + u(t)`` started from f(0) = 0. Drawing frequencies
from the spectral density of an exponentiated-quadratic kernel and
stacking real and imaginary parts yields a weight-space basis whose inner
products converge to the force's convolved kernel as the number of
features grows.

Two routes compute the same quantity on purpose. ``rfrf_complex`` and the
``*_feature_vector`` helpers use complex arithmetic directly and exist as
plain, easily-audited references. ``rfrf_features`` is the training-path
operation: it evaluates the expanded real/imaginary algebra with fused
numpy kernels and hand-derived gradients, and the test suite holds it to
agreement with the complex route.

Multi-dimensional inputs use one decay and one frequency per input
dimension and sum the responses across dimensions, so each scalar feature
is sum_m phi(x_m, gamma_m, omega_m).
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import DomainError, ParameterError, ShapeError


@dataclass
class RFRFSpec:
    """Static description of an ODE response feature map.

    gamma: decay per input dimension, shape (input_dim,), all positive.
    sensitivities: per-force output scale S_q, shape (q,).
    q: number of latent forces.
    n_rf: random features per force.
    input_dim: number of input dimensions.
    """

    gamma: np.ndarray
    sensitivities: np.ndarray
    q: int
    n_rf: int
    input_dim: int

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=np.float64)
        self.sensitivities = np.asarray(self.sensitivities, dtype=np.float64)
        if self.q < 1 or self.n_rf < 1 or self.input_dim < 1:
            raise ParameterError(
                f"RFRFSpec: q={self.q}, n_rf={self.n_rf}, "
                f"input_dim={self.input_dim} must all be >= 1"
            )
        if self.gamma.shape != (self.input_dim,):
            raise ParameterError(
                f"RFRFSpec: gamma shape {self.gamma.shape} != ({self.input_dim},)"
            )
        if np.any(self.gamma <= 0):
            raise ParameterError("RFRFSpec: decays must be positive")
        if self.sensitivities.shape != (self.q,):
            raise ParameterError(
                f"RFRFSpec: sensitivities shape {self.sensitivities.shape} "
                f"!= ({self.q},)"
            )

    @property
    def feature_count(self):
        return 2 * self.q * self.n_rf


@dataclass
class SpectralFrequencies:
    """Frequencies drawn from per-force spectral densities.

    omega[q, s, m] is the frequency of sample s for force q along input
    dimension m; lengthscales[q, m] records the lengthscale that produced
    that column's distribution.
    """

    omega: np.ndarray
    lengthscales: np.ndarray

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=np.float64)
        self.lengthscales = np.asarray(self.lengthscales, dtype=np.float64)
        if self.omega.ndim != 3:
            raise ParameterError(
                f"SpectralFrequencies: omega must be (q, n_rf, input_dim), "
                f"got {self.omega.shape}"
            )
        q, _, p = self.omega.shape
        if self.lengthscales.shape != (q, p):
            raise ParameterError(
                f"SpectralFrequencies: lengthscales shape "
                f"{self.lengthscales.shape} != ({q}, {p})"
            )

    def to_matrix(self):
        """Flatten to (input_dim, q*n_rf) with force-major column blocks."""
        q, n_rf, p = self.omega.shape
        return self.omega.transpose(2, 0, 1).reshape(p, q * n_rf)


@dataclass
class EQFeatureSpec:
    """Static description of a plain exponentiated-quadratic feature map."""

    variance: float
    n_rf: int
    input_dim: int

    def __post_init__(self):
        if self.variance <= 0:
            raise ParameterError("EQFeatureSpec: variance must be positive")
        if self.n_rf < 1 or self.input_dim < 1:
            raise ParameterError("EQFeatureSpec: n_rf and input_dim must be >= 1")

    @property
    def feature_count(self):
        return 2 * self.n_rf


def sample_rfrf_frequencies(lengthscales, n_rf, rng):
    """Draw omega[q, s, m] ~ N(0, 2 / lengthscales[q, m]**2).

    The variance follows from writing the force's stationary kernel as
    exp(-d**2 / l**2) and reading off its spectral density.
    """
    ls = np.asarray(lengthscales, dtype=np.float64)
    if ls.ndim != 2:
        raise ParameterError(
            f"sample_rfrf_frequencies: lengthscales must be (q, input_dim), "
            f"got {ls.shape}"
        )
    if np.any(ls <= 0):
        raise ParameterError("sample_rfrf_frequencies: lengthscales must be positive")
    q, p = ls.shape
    std = np.sqrt(2.0) / ls
    omega = rng.standard_normal((q, n_rf, p)) * std[:, None, :]
    return SpectralFrequencies(omega=omega, lengthscales=ls)


def sample_eq_frequencies(lengthscales, n_rf, rng):
    """Draw omega[m, s] ~ N(0, lengthscales[m]**-2) for an EQ kernel."""
    ls = np.asarray(lengthscales, dtype=np.float64)
    if ls.ndim != 1:
        raise ParameterError(
            f"sample_eq_frequencies: lengthscales must be 1-D, got {ls.shape}"
        )
    if np.any(ls <= 0):
        raise ParameterError("sample_eq_frequencies: lengthscales must be positive")
    return rng.standard_normal((ls.shape[0], n_rf)) / ls[:, None]


def rfrf_complex(t, gamma, omega):
    """Reference response feature via complex arithmetic.

    Broadcasts over numpy-compatible shapes and returns (real, imag).
    """
    t = np.asarray(t, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.float64)
    omega = np.asarray(omega, dtype=np.float64)
    if np.any(gamma <= 0):
        raise DomainError("rfrf_complex: gamma must be positive")
    phi = (np.exp(1j * omega * t) - np.exp(-gamma * t)) / (gamma + 1j * omega)
    return phi.real, phi.imag


def rfrf_feature_vector(x, spec, freqs):
    """Scaled feature vector for one input point, shape (2*q*n_rf,).

    Layout: all real parts first (force-major, sample-minor), then all
    imaginary parts in the same order. Each entry is scaled by
    sqrt(S_q**2 / n_rf).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (spec.input_dim,):
        raise ShapeError(
            f"rfrf_feature_vector: x shape {x.shape} != ({spec.input_dim},)"
        )
    if freqs.omega.shape != (spec.q, spec.n_rf, spec.input_dim):
        raise ShapeError(
            f"rfrf_feature_vector: omega shape {freqs.omega.shape} != "
            f"({spec.q}, {spec.n_rf}, {spec.input_dim})"
        )
    re, im = rfrf_complex(x, spec.gamma, freqs.omega)  # (q, n_rf, p)
    re = re.sum(axis=2).reshape(-1)
    im = im.sum(axis=2).reshape(-1)
    scale = np.repeat(
        np.sqrt(np.square(spec.sensitivities) / spec.n_rf), spec.n_rf
    )
    return np.concatenate([scale * re, scale * im])


def rfrf_feature_matrix(x_matrix, spec, freqs):
    """Scaled feature vectors for a batch of points, shape (n, 2*q*n_rf)."""
    x_matrix = np.asarray(x_matrix, dtype=np.float64)
    if x_matrix.ndim != 2 or x_matrix.shape[1] != spec.input_dim:
        raise ShapeError(
            f"rfrf_feature_matrix: expected (n, {spec.input_dim}), "
            f"got {x_matrix.shape}"
        )
    re, im = rfrf_complex(
        x_matrix[:, None, None, :], spec.gamma, freqs.omega[None]
    )  # (n, q, n_rf, p)
    re = re.sum(axis=3).reshape(x_matrix.shape[0], -1)
    im = im.sum(axis=3).reshape(x_matrix.shape[0], -1)
    scale = np.repeat(
        np.sqrt(np.square(spec.sensitivities) / spec.n_rf), spec.n_rf
    )
    return np.concatenate([scale * re, scale * im], axis=1)


def eq_feature_vector(x, spec, omega):
    """Classic random Fourier features sqrt(var/n_rf)*[cos(x.W), sin(x.W)]."""
    x = np.asarray(x, dtype=np.float64)
    omega = np.asarray(omega, dtype=np.float64)
    if x.shape != (spec.input_dim,):
        raise ShapeError(
            f"eq_feature_vector: x shape {x.shape} != ({spec.input_dim},)"
        )
    if omega.shape != (spec.input_dim, spec.n_rf):
        raise ShapeError(
            f"eq_feature_vector: omega shape {omega.shape} != "
            f"({spec.input_dim}, {spec.n_rf})"
        )
    u = x @ omega
    scale = np.sqrt(spec.variance / spec.n_rf)
    return scale * np.concatenate([np.cos(u), np.sin(u)])


def rfrf_features(f, gamma, omega, n_mc, scale=None):
    """Fused engine op: ODE response features for stacked samples.

    f:      Tensor (n_mc*n, input_dim), n_mc vertically stacked batches.
    gamma:  Tensor (input_dim,), positive decays shared across the stack.
    omega:  Tensor (n_mc*input_dim, k), one (input_dim, k) frequency block
            per stacked batch.
    scale:  optional Tensor (1, 2*k) of per-feature factors applied to the
            output columns (the sensitivity row); folding it in here keeps
            the multiply out of the big elementwise graph.
    Returns Tensor (n_mc*n, 2*k): real parts then imaginary parts of
    sum_m phi(f[:, m], gamma[m], omega[m, :]), per stacked batch.
    """
    if not isinstance(f, Tensor) or not isinstance(gamma, Tensor) or not isinstance(omega, Tensor):
        raise ShapeError("rfrf_features: all inputs must be Tensors")
    if f.data.ndim != 2 or omega.data.ndim != 2 or gamma.data.ndim != 1:
        raise ShapeError(
            f"rfrf_features: shapes {f.data.shape}, {gamma.data.shape}, "
            f"{omega.data.shape} invalid"
        )
    p = f.data.shape[1]
    if gamma.data.shape[0] != p:
        raise ShapeError(
            f"rfrf_features: gamma has {gamma.data.shape[0]} entries for "
            f"{p} input dimensions"
        )
    if f.data.shape[0] % n_mc or omega.data.shape[0] != n_mc * p:
        raise ShapeError(
            f"rfrf_features: row counts {f.data.shape[0]}, "
            f"{omega.data.shape[0]} inconsistent with n_mc={n_mc}, "
            f"input_dim={p}"
        )
    if np.any(gamma.data <= 0):
        raise DomainError("rfrf_features: gamma must be positive")
    k = omega.data.shape[1]
    if scale is not None:
        if not isinstance(scale, Tensor):
            raise ShapeError("rfrf_features: scale must be a Tensor")
        if scale.data.shape != (1, 2 * k):
            raise ShapeError(
                f"rfrf_features: scale shape {scale.data.shape} != (1, {2 * k})"
            )

    n = f.data.shape[0] // n_mc
    f3 = f.data.reshape(n_mc, n, p)
    om3 = omega.data.reshape(n_mc, p, k)
    gamma_data = gamma.data
    s_re = scale.data[:, :k] if scale is not None else None
    s_im = scale.data[:, k:] if scale is not None else None
    recording = ad._GRAD_ENABLED and (
        f.requires_grad
        or gamma.requires_grad
        or omega.requires_grad
        or (scale is not None and scale.requires_grad)
    )

    # Work one stacked batch at a time so every intermediate is an (n, k)
    # block that stays cache resident; full-width passes over the
    # (n_mc*n, k) arrays are memory bound and several times slower.
    out3 = np.empty((n_mc, n, 2 * k))
    re_out = out3[:, :, :k]
    im_out = out3[:, :, k:]

    # per-feature coefficient rows: phi = coef_g*(cos(u) - e) + coef_o*sin(u)
    # for the real part and coef_g*sin(u) - coef_o*(cos(u) - e) for the
    # imaginary part, with coef_g = gamma/den, coef_o = omega/den.
    coef_g = np.empty((p, n_mc, k))
    coef_o = np.empty((p, n_mc, k))
    for m in range(p):
        om_m = om3[:, m, :]
        den = gamma_data[m] * gamma_data[m] + om_m * om_m
        np.divide(gamma_data[m], den, out=coef_g[m])
        np.divide(om_m, den, out=coef_o[m])

    if recording:
        re_s = [np.empty((n_mc, n, k)) for _ in range(p)]
        im_s = [np.empty((n_mc, n, k)) for _ in range(p)]
        ce_s = [np.empty((n_mc, n, k)) for _ in range(p)]
        su_s = [np.empty((n_mc, n, k)) for _ in range(p)]
        e_s = [np.empty((n_mc, n)) for _ in range(p)]
    else:
        blk = np.empty((4, n, k))
        e_blk = np.empty((p, n_mc, n))

    t0 = np.empty((n, k))
    t1 = np.empty((n, k))
    for m in range(p):
        gm = gamma_data[m]
        e_m = e_s[m] if recording else e_blk[m]
        np.exp(f3[:, :, m] * (-gm), out=e_m)
        for r in range(n_mc):
            x = f3[r, :, m][:, None]
            u = np.multiply(x, om3[r, m][None, :], out=t0)
            su = np.sin(u, out=su_s[m][r] if recording else blk[0])
            cu = np.cos(u, out=t0)
            ce = np.subtract(
                cu, e_m[r][:, None], out=ce_s[m][r] if recording else blk[1]
            )
            a_row = coef_g[m][r][None, :]
            b_row = coef_o[m][r][None, :]
            rem = np.multiply(a_row, ce, out=re_s[m][r] if recording else blk[2])
            rem += np.multiply(b_row, su, out=t1)
            imm = np.multiply(a_row, su, out=im_s[m][r] if recording else blk[3])
            imm -= np.multiply(b_row, ce, out=t1)
            if p == 1:
                if s_re is not None:
                    np.multiply(rem, s_re, out=re_out[r])
                    np.multiply(imm, s_im, out=im_out[r])
                else:
                    np.copyto(re_out[r], rem)
                    np.copyto(im_out[r], imm)
            else:
                if m == 0:
                    np.copyto(re_out[r], rem)
                    np.copyto(im_out[r], imm)
                else:
                    re_out[r] += rem
                    im_out[r] += imm
                if m == p - 1 and s_re is not None:
                    re_out[r] *= s_re
                    im_out[r] *= s_im

    out = Tensor(out3.reshape(n_mc * n, 2 * k))
    if not recording:
        return out

    need_f = f.requires_grad
    need_gamma = gamma.requires_grad
    need_omega = omega.requires_grad
    need_scale = scale is not None and scale.requires_grad
    saved = [re_s, im_s, ce_s, su_s, e_s]

    def backward(g):
        re_s, im_s, ce_s, su_s, e_s = saved
        saved.clear()
        g3 = g.reshape(n_mc, n, 2 * k)
        gf = np.empty((n_mc, n, p)) if need_f else None
        ggamma = np.zeros(p) if need_gamma else None
        gomega = np.empty((n_mc, p, k)) if need_omega else None
        gs_re = np.zeros(k) if need_scale else None
        gs_im = np.zeros(k) if need_scale else None
        t0 = np.empty((n, k))
        t1 = np.empty((n, k))
        t2 = np.empty((n, k))
        t3 = np.empty((n, k))
        t4 = np.empty((n, k))
        for m in range(p):
            gm = gamma_data[m]
            for r in range(n_mc):
                gre = g3[r, :, :k]
                gim = g3[r, :, k:]
                ce = ce_s[m][r]
                su = su_s[m][r]
                rem = re_s[m][r]
                imm = im_s[m][r]
                a_row = coef_g[m][r][None, :]
                b_row = coef_o[m][r][None, :]
                x = f3[r, :, m]
                xe = x * e_s[m][r]
                # gradient reaching the raw parts carries the scale row, so
                # fold it into the per-block coefficient rows
                if s_re is None:
                    c1, c2, c3, c4 = a_row, b_row, b_row, a_row
                else:
                    c1 = a_row * s_re
                    c2 = b_row * s_im
                    c3 = b_row * s_re
                    c4 = a_row * s_im
                # shared row images of the upstream gradient:
                # h1 = a*g_re - b*g_im, h2 = b*g_re + a*g_im
                h1 = np.multiply(c1, gre, out=t0)
                h1 -= np.multiply(c2, gim, out=t2)
                h2 = np.multiply(c3, gre, out=t1)
                h2 += np.multiply(c4, gim, out=t2)
                if need_scale:
                    # parts are saved unscaled, so the product rule reduces
                    # to plain contractions against the incoming gradient
                    gs_re += np.einsum("nk,nk->k", gre, rem)
                    gs_im += np.einsum("nk,nk->k", gim, imm)
                if need_f:
                    if s_re is None:
                        ge_re = gre
                        ge_im = gim
                    else:
                        ge_re = np.multiply(gre, s_re, out=t3)
                        ge_im = np.multiply(gim, s_im, out=t4)
                    # d(phi)/dt = exp(j*om*t) - gamma*phi, regrouped so the
                    # cos-term splits into the saved ce plus an e column:
                    # sum_k[ce*(g_re - gm*h1) + su*(g_im - gm*h2)] + e*sum_k g_re
                    w1 = np.multiply(h1, -gm, out=t2)
                    w1 += ge_re
                    w1 *= ce
                    col = w1.sum(axis=1)
                    w2 = np.multiply(h2, -gm, out=t2)
                    w2 += ge_im
                    w2 *= su
                    col += w2.sum(axis=1)
                    col += e_s[m][r] * ge_re.sum(axis=1)
                    gf[r, :, m] = col
                if need_gamma:
                    # d(phi)/dgamma = (t*e - phi)/(gamma + j*om) contracts to
                    # xe.(rowsum h1) - <re, h1> - <im, h2>
                    ggamma[m] += (
                        xe @ h1.sum(axis=1)
                        - np.einsum("nk,nk->", rem, h1)
                        - np.einsum("nk,nk->", imm, h2)
                    )
                if need_omega:
                    # d(phi)/dom = j*(t*exp(j*om*t) - phi)/(gamma + j*om)
                    # contracts to x@(ce*h2 - su*h1) + xe@h2 - colsum terms
                    w = np.multiply(ce, h2, out=t2)
                    row = x @ w
                    w = np.multiply(su, h1, out=t2)
                    row -= x @ w
                    row += xe @ h2
                    row -= np.einsum("nk,nk->k", rem, h2)
                    row += np.einsum("nk,nk->k", imm, h1)
                    gomega[r, m] = row
        grads = (
            gf.reshape(n_mc * n, p) if need_f else None,
            ggamma,
            gomega.reshape(n_mc * p, k) if need_omega else None,
        )
        if scale is None:
            return grads
        gscale = (
            np.concatenate([gs_re, gs_im])[None, :] if need_scale else None
        )
        return grads + (gscale,)

    parents = (f, gamma, omega) if scale is None else (f, gamma, omega, scale)
    return ad._record(out, parents, backward)


def rfrf_scale_row(sensitivities, n_rf):
    """Engine-op row (1, 2*q*n_rf) of per-feature scales sqrt(S_q**2/n_rf).

    ``sensitivities`` is a (1, q) Tensor; squaring keeps the scale positive
    while leaving the underlying parameter free to change sign.
    """
    s2 = ad.square(sensitivities)
    scale = ad.sqrt(ad.div(s2, float(n_rf)))
    block = ad.repeat_cols(scale, n_rf)
    return ad.concat([block, block], axis=1)
