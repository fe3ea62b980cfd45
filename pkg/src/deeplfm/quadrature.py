"""Quadrature oracles for the ODE response features and their kernel.

These routines recompute, by direct numerical integration, quantities the
rest of the package obtains in closed form. They exist so tests can hold
the fast paths to an independent reference; nothing in the training path
calls them.

The response feature is the convolution integral

    phi(t, gamma, omega) = integral_0^t exp(-gamma*(t - tau)) * exp(j*omega*tau) dtau

and the force kernel with an exponentiated-quadratic input kernel
``exp(-(tau - tau')**2 / l**2)`` is the matching double convolution
scaled by the squared sensitivity.
"""

import numpy as np
from scipy import integrate


def response_feature_quadrature(t, gamma, omega, tol=1e-12):
    """Adaptive quadrature for one response feature; returns (re, im).

    Absolute error is far below 1e-10 for the parameter ranges used in
    tests (the integrand is a product of an exponential and a sinusoid).
    """
    t = float(t)
    gamma = float(gamma)
    omega = float(omega)
    if t == 0.0:
        return 0.0, 0.0

    def integrand_re(tau):
        return np.exp(-gamma * (t - tau)) * np.cos(omega * tau)

    def integrand_im(tau):
        return np.exp(-gamma * (t - tau)) * np.sin(omega * tau)

    re, _ = integrate.quad(integrand_re, 0.0, t, epsabs=tol, epsrel=tol, limit=400)
    im, _ = integrate.quad(integrand_im, 0.0, t, epsabs=tol, epsrel=tol, limit=400)
    return re, im


def response_feature_quadrature_grid(t, gamma, omega, panels=16, order=20):
    """Vectorized composite Gauss-Legendre version of the response integral.

    All three arguments are broadcast elementwise. With the default panel
    count and order the quadrature error is below 1e-12 for |omega| <= 40
    and t <= 5, which tests confirm against the adaptive routine.
    """
    t, gamma, omega = np.broadcast_arrays(
        np.asarray(t, dtype=np.float64),
        np.asarray(gamma, dtype=np.float64),
        np.asarray(omega, dtype=np.float64),
    )
    shape = t.shape
    tf = t.reshape(-1, 1)
    gf = gamma.reshape(-1, 1)
    of = omega.reshape(-1, 1)

    nodes, weights = np.polynomial.legendre.leggauss(order)
    # panel edges on [0, 1], then scaled per point by t
    edges = np.linspace(0.0, 1.0, panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1] - edges[0])
    unit_tau = (mid[:, None] + half * nodes[None, :]).reshape(-1)  # (panels*order,)
    unit_w = np.tile(weights, panels) * half

    tau = tf * unit_tau[None, :]
    w = tf * unit_w[None, :]
    decay = np.exp(-gf * (tf - tau))
    re = (w * decay * np.cos(of * tau)).sum(axis=1)
    im = (w * decay * np.sin(of * tau)).sum(axis=1)
    return re.reshape(shape), im.reshape(shape)


def lfm_kernel_quadrature(t, t_prime, gamma, lengthscale, sensitivity, tol=1e-10):
    """Double adaptive quadrature for the single-force response kernel.

    k(t, t') = S**2 * integral_0^t integral_0^t' exp(-gamma*(t - tau))
               * exp(-gamma*(t' - tau')) * exp(-(tau - tau')**2 / l**2)
               dtau' dtau
    """
    t = float(t)
    t_prime = float(t_prime)
    gamma = float(gamma)
    ell = float(lengthscale)
    if t == 0.0 or t_prime == 0.0:
        return 0.0

    def integrand(tau_p, tau):
        return (
            np.exp(-gamma * (t - tau))
            * np.exp(-gamma * (t_prime - tau_p))
            * np.exp(-((tau - tau_p) ** 2) / ell**2)
        )

    val, _ = integrate.dblquad(
        integrand, 0.0, t, 0.0, t_prime, epsabs=tol, epsrel=tol
    )
    return float(sensitivity) ** 2 * val


def lfm_kernel_matrix_quadrature(ts, gamma, lengthscale, sensitivity, tol=1e-10):
    """Symmetric kernel matrix over a 1-D grid via the double quadrature."""
    ts = np.asarray(ts, dtype=np.float64)
    n = ts.shape[0]
    out = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            val = lfm_kernel_quadrature(
                ts[i], ts[j], gamma, lengthscale, sensitivity, tol=tol
            )
            out[i, j] = val
            out[j, i] = val
    return out
