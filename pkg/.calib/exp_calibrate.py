"""Calibration probes for the FHN / Lorenz / EQ-baseline recipes.

Reuses the recipe architectures from deeplfm.experiments but trains with
a probe callback so metric-vs-iteration curves land in CSV files.

Usage: python3 exp_calibrate.py NAME SEED MAX_ITERS [KIND] [LR] [TAG]
  NAME in {toy, fhn-a, fhn-b, lorenz}
"""
import os
import sys
import time

import numpy as np

sys.path.insert(0, "/root/pkg/src")

from deeplfm.data import Normalization
from deeplfm.dynamics import generate_fitzhugh_nagumo, generate_lorenz, generate_toy
from deeplfm.metrics import nmse, mnll
from deeplfm.model import DLFMNetwork
from deeplfm import experiments as ex
from deeplfm import training as tr

OUT = "/root/pkg/.calib"


def setup(name, seed, kind):
    if name == "toy":
        ds = generate_toy(seed=seed).to_dataset()
        recipe = ex.run_toy
    elif name in ("fhn-a", "fhn-b"):
        ds = generate_fitzhugh_nagumo(seed=seed, scenario=name[-1]).to_dataset()
        recipe = lambda **kw: ex.run_fitzhugh_nagumo(scenario=name[-1], **kw)
    elif name == "lorenz":
        ds = generate_lorenz(seed=seed).to_dataset()
        recipe = ex.run_lorenz
    else:
        raise SystemExit(f"unknown experiment {name}")
    # steal the configs from a zero-iteration recipe run
    res = recipe(seed=seed, kind=kind, max_iterations=0)
    return ds, res.net.config, res


def eval_split(net, ds, split, use_truth):
    norm = Normalization.from_dict(net.normalization)
    x, y = ds.split_arrays(split, use_truth=use_truth)
    mean_n, var_n = net.predict(norm.normalize_x(x))
    mean = norm.denormalize_mean(mean_n)
    var = norm.denormalize_var(var_n)
    return float(np.mean(nmse(y, mean))), float(np.mean(mnll(y, mean, var)))


def run(name, seed, max_iters, kind, lr=0.01, tag="", hidden_ls=None,
        batch=None, n_mc=None, n_rf=None):
    import dataclasses
    ds, net_cfg, res0 = setup(name, seed, kind)
    if hidden_ls is not None:
        net_cfg = dataclasses.replace(net_cfg, hidden_ls_init=hidden_ls)
    if n_mc is not None:
        net_cfg = dataclasses.replace(net_cfg, n_mc=n_mc)
    if n_rf is not None:
        hidden = [dataclasses.replace(h, n_rf=n_rf) for h in net_cfg.hidden]
        net_cfg = dataclasses.replace(net_cfg, hidden=hidden)
    tcfg = res0.train_result  # unused, rebuild below
    if name == "toy":
        dbatch, split, use_truth = ex.TOY_BATCH, "extrapolation", False
    elif name.startswith("fhn"):
        dbatch = ex.FHN_BATCH
        split = "train" if name == "fhn-a" else "test"
        use_truth = name == "fhn-a"
    else:
        dbatch, split, use_truth = ex.LORENZ_BATCH, "test", False
    if batch is None:
        batch = dbatch

    net = DLFMNetwork(net_cfg, seed)
    tcfg = tr.TrainConfig(max_iterations=max_iters, batch_size=batch,
                          learning_rate=lr, log_every=150, seed=seed,
                          input_normalization="identity")
    path = os.path.join(OUT, f"{name}_{kind}{tag}_seed{seed}.csv")
    t0 = time.time()
    with open(path, "w") as fh:
        fh.write("iteration,elbo,probe_nmse,probe_mnll,elapsed_s\n")
        fh.flush()

        def cb(row):
            en, em = eval_split(net, ds, split, use_truth)
            fh.write(f"{row.iteration},{row.elbo:.3f},{en:.4f},{em:.4f},"
                     f"{time.time()-t0:.0f}\n")
            fh.flush()

        tr.train(net, ds, tcfg, trace_callback=cb)
    print(f"done {name} {kind} seed {seed}: {time.time()-t0:.0f}s", flush=True)

    # dump the probe-split forecast for shape inspection
    norm = Normalization.from_dict(net.normalization)
    x, y = ds.split_arrays(split, use_truth=use_truth)
    mean_n, var_n = net.predict(norm.normalize_x(x))
    mean = norm.denormalize_mean(mean_n)
    var = norm.denormalize_var(var_n)
    dump = os.path.join(OUT, f"{name}_{kind}{tag}_seed{seed}_pred.csv")
    with open(dump, "w") as fh:
        cols = ["t"]
        for j in range(y.shape[1]):
            cols += [f"y{j+1}", f"mean{j+1}", f"sd{j+1}"]
        fh.write(",".join(cols) + "\n")
        for i in range(len(x)):
            row = [f"{x[i, 0]:.5f}"]
            for j in range(y.shape[1]):
                row += [f"{y[i, j]:.5f}", f"{mean[i, j]:.5f}",
                        f"{np.sqrt(var[i, j]):.5f}"]
            fh.write(",".join(row) + "\n")


if __name__ == "__main__":
    name = sys.argv[1]
    seed = int(sys.argv[2])
    iters = int(sys.argv[3])
    kind = sys.argv[4] if len(sys.argv) > 4 else "rfrf"
    lr = float(sys.argv[5]) if len(sys.argv) > 5 else 0.01
    tag = sys.argv[6] if len(sys.argv) > 6 else ""
    hls = float(sys.argv[7]) if len(sys.argv) > 7 else None
    batch = int(sys.argv[8]) if len(sys.argv) > 8 else None
    n_mc = int(sys.argv[9]) if len(sys.argv) > 9 else None
    n_rf = int(sys.argv[10]) if len(sys.argv) > 10 else None
    run(name, seed, iters, kind, lr, tag, hls, batch, n_mc, n_rf)
