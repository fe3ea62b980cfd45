"""Dynamical systems, a Runge-Kutta integrator, and dataset generators.

Three benchmark generators produce noisy observation datasets with named
splits. Time axes are rescaled so dataset inputs live on compact unit
ranges, while the underlying dynamics run in raw time; the rescaling
factor is part of each generator's parameter echo.

The compositional toy problem drives two first-order decays with the
forcing ``u(t) = cos(0.5 t) + 6 sin(3 t)``: f1 responds to u over raw
time, f2 is the response of a second decay evaluated at argument f1(t),
and observations are y(t) = f2(f1(t)) + noise. Training covers the unit
interval minus a held-out interpolation window at [0.208, 0.375] in
rescaled time, with an extrapolation split beyond the training range.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .data import SeriesDataset
from .errors import DataError, IntegrationError, ParameterError


def rk4_step(system, t, y, h):
    """One classical Runge-Kutta step for dy/dt = system(t, y)."""
    k1 = system(t, y)
    k2 = system(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = system(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = system(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_integrate(system, y0, t0, t1, n_steps):
    """Fixed-step trajectory, shape (n_steps + 1, dim), endpoints included."""
    if n_steps < 1:
        raise ParameterError(f"rk4_integrate: n_steps must be >= 1, got {n_steps}")
    y = np.asarray(y0, dtype=np.float64).copy()
    if y.ndim != 1:
        raise ParameterError("rk4_integrate: y0 must be 1-D")
    h = (t1 - t0) / n_steps
    out = np.empty((n_steps + 1, y.shape[0]))
    out[0] = y
    t = t0
    for i in range(n_steps):
        y = rk4_step(system, t, y, h)
        if not np.isfinite(y).all():
            raise IntegrationError(
                f"non-finite state at step {i + 1} (t = {t + h})", step=i + 1
            )
        t = t0 + (i + 1) * h
        out[i + 1] = y
    return out


def integrate_at_times(system, y0, t0, times, max_step=1e-3):
    """States at the requested times, chaining fixed substeps between them.

    ``times`` must be non-decreasing and start at or after ``t0``.
    """
    times = np.asarray(times, dtype=np.float64)
    if times.size and times[0] < t0:
        raise ParameterError("integrate_at_times: times must start at or after t0")
    if np.any(np.diff(times) < 0):
        raise ParameterError("integrate_at_times: times must be non-decreasing")
    y = np.asarray(y0, dtype=np.float64).copy()
    out = np.empty((times.size, y.shape[0]))
    t = t0
    for i, target in enumerate(times):
        span = target - t
        if span > 0:
            n_sub = max(1, math.ceil(span / max_step))
            h = span / n_sub
            for k in range(n_sub):
                y = rk4_step(system, t + k * h, y, h)
            if not np.isfinite(y).all():
                raise IntegrationError(
                    f"non-finite state reaching t = {target}", step=i
                )
            t = target
        out[i] = y
    return out


@dataclass
class GeneratedSeries:
    """Raw output of a generator: exact states plus noisy observations."""

    times: np.ndarray                  # (n,), strictly increasing, rescaled
    states: np.ndarray                 # (n, d) noiseless
    observations: np.ndarray           # (n, d) = states + noise
    noise_var: float
    splits: dict                       # name -> indices, pairwise disjoint
    target_names: list
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.states = np.asarray(self.states, dtype=np.float64)
        self.observations = np.asarray(self.observations, dtype=np.float64)
        if np.any(np.diff(self.times) <= 0):
            raise DataError("GeneratedSeries: times must be strictly increasing")
        seen = np.zeros(self.times.shape[0], dtype=bool)
        for name, idx in self.splits.items():
            idx = np.asarray(idx, dtype=np.intp)
            if seen[idx].any():
                raise DataError(
                    f"GeneratedSeries: split {name!r} overlaps another split"
                )
            seen[idx] = True

    def to_dataset(self, include_truth=True):
        return SeriesDataset(
            inputs=self.times[:, None],
            targets=self.observations,
            splits={k: np.asarray(v, dtype=np.intp) for k, v in self.splits.items()},
            input_names=["t"],
            target_names=list(self.target_names),
            truth=self.states if include_truth else None,
        )


# -- compositional toy problem -------------------------------------------------


def toy_forcing(t, amp=6.0, slow=0.5, fast=3.0):
    return np.cos(slow * t) + amp * np.sin(fast * t)


def _decay_response_at(points, gamma, forcing, max_step=1e-3):
    """Solutions of df/da = -gamma*f + forcing(a), f(0) = 0, at arbitrary
    points of either sign, chaining RK4 away from the origin."""
    points = np.asarray(points, dtype=np.float64)
    out = np.empty_like(points)
    order = np.argsort(points)
    sorted_pts = points[order]

    def system(a, f):
        return -gamma * f + forcing(a)

    # march right from 0 over the non-negative points
    y = np.zeros(1)
    a = 0.0
    for j in np.nonzero(sorted_pts >= 0)[0]:
        target = sorted_pts[j]
        span = target - a
        if span > 0:
            n_sub = max(1, math.ceil(span / max_step))
            h = span / n_sub
            for k in range(n_sub):
                y = rk4_step(system, a + k * h, y, h)
            a = target
        out[order[j]] = y[0]
    # march left from 0 over the negative points
    y = np.zeros(1)
    a = 0.0
    for j in np.nonzero(sorted_pts < 0)[0][::-1]:
        target = sorted_pts[j]
        span = target - a
        if span < 0:
            n_sub = max(1, math.ceil(-span / max_step))
            h = span / n_sub
            for k in range(n_sub):
                y = rk4_step(system, a + k * h, y, h)
            a = target
        out[order[j]] = y[0]
    return out


def generate_toy(seed, n_grid=600, n_interp=100, n_extrap=150,
                 gamma1=0.01, gamma2=0.02, noise_var=0.04,
                 window=(0.208, 0.375), time_scale=24.0, max_step=1e-3,
                 forcing=None):
    """Composition of two driven decays, observed with Gaussian noise.

    Splits: ``train`` covers an even grid on [0, 1] minus the held-out
    window, ``interpolation`` fills the window, ``extrapolation`` extends
    past the training range to 1.25. Rescaled time t corresponds to raw
    time ``time_scale * t`` inside the dynamics. ``forcing`` replaces the
    default latent force u(t).
    """
    if noise_var < 0:
        raise ParameterError("generate_toy: noise_var must be >= 0")
    if forcing is None:
        forcing = toy_forcing
    lo, hi = window
    t_grid = np.linspace(0.0, 1.0, n_grid)
    keep = (t_grid < lo) | (t_grid > hi)
    t_train = t_grid[keep]
    t_interp = np.linspace(lo, hi, n_interp)
    t_extrap = np.linspace(1.0, 1.25, n_extrap + 1)[1:]

    times = np.concatenate([t_train, t_interp, t_extrap])
    labels = np.concatenate([
        np.zeros(t_train.size, dtype=int),
        np.ones(t_interp.size, dtype=int),
        np.full(t_extrap.size, 2, dtype=int),
    ])
    order = np.argsort(times, kind="stable")
    times = times[order]
    labels = labels[order]
    if np.any(np.diff(times) <= 0):
        raise DataError("generate_toy: duplicate time points")

    def f1_system(t, y):
        return -gamma1 * y + forcing(t)

    raw_times = time_scale * times
    f1 = integrate_at_times(f1_system, [0.0], 0.0, raw_times, max_step)[:, 0]
    f2 = _decay_response_at(f1, gamma2, forcing, max_step)

    gen = np.random.default_rng(seed)
    noise = gen.normal(0.0, np.sqrt(noise_var), size=f2.shape)
    states = f2[:, None]
    observations = states + noise[:, None]

    splits = {
        "train": np.nonzero(labels == 0)[0],
        "interpolation": np.nonzero(labels == 1)[0],
        "extrapolation": np.nonzero(labels == 2)[0],
    }
    return GeneratedSeries(
        times=times,
        states=states,
        observations=observations,
        noise_var=noise_var,
        splits=splits,
        target_names=["y1"],
        params={
            "generator": "toy",
            "seed": seed,
            "n_grid": n_grid,
            "n_interp": n_interp,
            "n_extrap": n_extrap,
            "gamma1": gamma1,
            "gamma2": gamma2,
            "noise_var": noise_var,
            "window_lo": lo,
            "window_hi": hi,
            "time_scale": time_scale,
            "max_step": max_step,
        },
    )


# -- FitzHugh-Nagumo -----------------------------------------------------------


def fitzhugh_nagumo_system(a=0.2, b=0.2, c=3.0):
    def system(t, y):
        v, r = y
        return np.array([
            c * (v - v**3 / 3.0 + r),
            -(v - a + b * r) / c,
        ])

    return system


def generate_fitzhugh_nagumo(seed, scenario="a", n_points=400,
                             a=0.2, b=0.2, c=3.0, y0=(-1.0, 1.0),
                             horizon=20.0, noise_var=0.01, n_train=300,
                             max_step=1e-3):
    """Spiking oscillator observed on an even grid over [0, horizon].

    Scenario "a": every point is training data and evaluation happens
    against the stored noiseless truth on the same points. Scenario "b":
    the first ``n_train`` points train the model and the remainder form a
    forecast test split. Dataset time is raw time divided by ``horizon``.
    """
    scenario = scenario.lower()
    if scenario not in ("a", "b"):
        raise ParameterError(f"generate_fitzhugh_nagumo: scenario {scenario!r}")
    if noise_var < 0:
        raise ParameterError("generate_fitzhugh_nagumo: noise_var must be >= 0")
    if scenario == "b" and not 0 < n_train < n_points:
        raise ParameterError(
            f"generate_fitzhugh_nagumo: n_train {n_train} outside (0, {n_points})"
        )
    raw_times = np.linspace(0.0, horizon, n_points)
    states = integrate_at_times(
        fitzhugh_nagumo_system(a, b, c), y0, 0.0, raw_times, max_step
    )
    gen = np.random.default_rng(seed)
    observations = states + gen.normal(
        0.0, np.sqrt(noise_var), size=states.shape
    )
    if scenario == "a":
        splits = {"train": np.arange(n_points)}
    else:
        splits = {
            "train": np.arange(n_train),
            "test": np.arange(n_train, n_points),
        }
    return GeneratedSeries(
        times=raw_times / horizon,
        states=states,
        observations=observations,
        noise_var=noise_var,
        splits=splits,
        target_names=["y1", "y2"],
        params={
            "generator": "fitzhugh_nagumo",
            "seed": seed,
            "scenario": scenario,
            "n_points": n_points,
            "a": a,
            "b": b,
            "c": c,
            "v0": y0[0],
            "r0": y0[1],
            "horizon": horizon,
            "noise_var": noise_var,
            "n_train": n_train if scenario == "b" else n_points,
            "max_step": max_step,
        },
    )


# -- Lorenz ---------------------------------------------------------------------


def lorenz_system(sigma=10.0, b=8.0 / 3.0, r=28.0):
    def system(t, y):
        x1, x2, x3 = y
        return np.array([
            sigma * (x2 - x1),
            x1 * (r - x3) - x2,
            x1 * x2 - b * x3,
        ])

    return system


def generate_lorenz(seed, train_fraction=0.8, sigma=10.0, b=8.0 / 3.0,
                    r=28.0, n_points=1000, horizon=50.0, y0=(1.0, 1.0, 1.0),
                    max_step=1e-3):
    """Lorenz trajectory observed exactly (no observation noise).

    The first ``train_fraction`` of the points in time order form the
    train split, the rest the test split. Dataset time is raw time
    divided by ``horizon``.
    """
    if not 0 < train_fraction < 1:
        raise ParameterError(
            f"generate_lorenz: train_fraction {train_fraction} outside (0, 1)"
        )
    raw_times = np.linspace(0.0, horizon, n_points)
    states = integrate_at_times(
        lorenz_system(sigma, b, r), y0, 0.0, raw_times, max_step
    )
    n_train = int(round(train_fraction * n_points))
    if not 0 < n_train < n_points:
        raise ParameterError(
            f"generate_lorenz: train_fraction {train_fraction} leaves an "
            "empty split"
        )
    splits = {
        "train": np.arange(n_train),
        "test": np.arange(n_train, n_points),
    }
    # seed kept for interface uniformity; the trajectory itself is exact
    return GeneratedSeries(
        times=raw_times / horizon,
        states=states,
        observations=states.copy(),
        noise_var=0.0,
        splits=splits,
        target_names=["y1", "y2", "y3"],
        params={
            "generator": "lorenz",
            "seed": seed,
            "train_fraction": train_fraction,
            "sigma": sigma,
            "b": b,
            "r": r,
            "n_points": n_points,
            "horizon": horizon,
            "x0": y0[0],
            "y0": y0[1],
            "z0": y0[2],
            "max_step": max_step,
        },
    )
