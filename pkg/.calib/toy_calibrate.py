"""Calibration: extrapolation quality vs iteration count on the toy task.

Writes one CSV per run with periodic probes so the acceptance iteration
budget can be chosen with margin. Not part of the package.

Usage: python3 toy_calibrate.py KIND SEED MAX_ITERS [TAG] [X_MODE] [BATCH] [LOG_EVERY]
"""
import os
import sys
import time

import numpy as np

sys.path.insert(0, "/root/pkg/src")

from deeplfm.data import Normalization
from deeplfm.dynamics import generate_toy
from deeplfm.metrics import nmse, mnll
from deeplfm.model import DLFMNetwork, NetworkConfig, LayerSpec
from deeplfm import training as tr

OUT = "/root/pkg/.calib"


def probe_metrics(net, ds):
    norm = Normalization.from_dict(net.normalization)
    x, y = ds.split_arrays("extrapolation")
    mean_n, var_n = net.predict(norm.normalize_x(x))
    mean = norm.denormalize_mean(mean_n)
    var = norm.denormalize_var(var_n)
    return float(np.mean(nmse(y, mean))), float(np.mean(mnll(y, mean, var)))


def run(kind, seed, max_iters, tag="", x_mode="zscore", batch=1000, log_every=25):
    series = generate_toy(seed=seed)
    ds = series.to_dataset()
    cfg = NetworkConfig(
        input_dim=1, output_dim=1,
        hidden=[LayerSpec(width=3, q=1, n_rf=100, kind=kind)],
        output=LayerSpec(width=1, q=1, n_rf=100, kind=kind),
        skip=True, n_mc=100,
    )
    net = DLFMNetwork(cfg, seed=seed)
    tcfg = tr.TrainConfig(max_iterations=max_iters, batch_size=batch,
                          learning_rate=0.01, validation_fraction=0.01,
                          log_every=log_every, seed=seed,
                          input_normalization=x_mode)
    path = os.path.join(OUT, f"{kind}{tag}_seed{seed}.csv")
    t0 = time.time()
    with open(path, "w") as fh:
        fh.write("iteration,elbo,extrap_nmse,extrap_mnll,elapsed_s\n")
        fh.flush()

        def cb(row):
            en, em = probe_metrics(net, ds)
            fh.write(f"{row.iteration},{row.elbo:.3f},{en:.4f},{em:.4f},"
                     f"{time.time()-t0:.0f}\n")
            fh.flush()

        tr.train(net, ds, tcfg, trace_callback=cb)
    print(f"done {kind}{tag} seed {seed}: {time.time()-t0:.0f}s", flush=True)


if __name__ == "__main__":
    kind = sys.argv[1]
    seed = int(sys.argv[2])
    iters = int(sys.argv[3])
    tag = sys.argv[4] if len(sys.argv) > 4 else ""
    x_mode = sys.argv[5] if len(sys.argv) > 5 else "zscore"
    batch = int(sys.argv[6]) if len(sys.argv) > 6 else 1000
    log_every = int(sys.argv[7]) if len(sys.argv) > 7 else 25
    run(kind, seed, iters, tag, x_mode, batch, log_every)
