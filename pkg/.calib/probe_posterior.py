"""Train the FHN-B recipe (batch 99, lr 0.02) and inspect the variational
posterior over frequencies: are the per-feature frequency std-devs small
enough for the predictive mean to stay coherent over the forecast gap?

Usage: python3 probe_posterior.py [MAX_ITERS] [LR] [NRF] [NMC] [BATCH]
"""
import sys
import time

import numpy as np

sys.path.insert(0, "/root/pkg/src")

import dataclasses

from deeplfm.dynamics import generate_fitzhugh_nagumo
from deeplfm.model import DLFMNetwork
from deeplfm import experiments as ex
from deeplfm import training as tr



def main():
    iters = int(sys.argv[1]) if len(sys.argv) > 1 else 2500
    lr = float(sys.argv[2]) if len(sys.argv) > 2 else 0.02
    nrf = int(sys.argv[3]) if len(sys.argv) > 3 else 50
    nmc = int(sys.argv[4]) if len(sys.argv) > 4 else 50
    batch = int(sys.argv[5]) if len(sys.argv) > 5 else 99

    ds = generate_fitzhugh_nagumo(seed=0, scenario="b").to_dataset()
    res0 = ex.run_fitzhugh_nagumo(seed=0, scenario="b", max_iterations=0)
    cfg = res0.net.config
    cfg = dataclasses.replace(cfg, n_mc=nmc)
    if nrf != 50:
        cfg = dataclasses.replace(
            cfg, hidden=[dataclasses.replace(h, n_rf=nrf) for h in cfg.hidden])
    net = DLFMNetwork(cfg, 0)
    tcfg = tr.TrainConfig(max_iterations=iters, batch_size=batch,
                          learning_rate=lr, log_every=max(1, iters // 5),
                          seed=0, input_normalization="identity")
    t0 = time.time()
    tr.train(net, ds, tcfg)
    print(f"trained {iters} iters in {time.time()-t0:.0f}s")

    for li, layer in enumerate(net.hidden + [net.output_units]):
        if isinstance(layer, list):
            layers = layer
            tags = [f"output.{j}" for j in range(len(layers))]
        else:
            layers = [layer]
            tags = [f"hidden.{li}"]
        for tag, lay in zip(tags, layers):
            ls = np.logaddexp(0.0, lay.ls_raw.value)
            print(f"\n[{tag}] kind={lay.kind} ls={np.round(ls.ravel(), 4)}")
            if lay.gamma_raw is not None:
                print(f"  gamma={np.round(np.logaddexp(0.0, lay.gamma_raw.value), 4)}")
            mu = lay.omega_mean.value          # (p, k)
            sd = np.exp(0.5 * lay.omega_raw.value)
            w = lay.w_mean.value               # (2k or 2n_rf, out)
            # feature energy: |w| for the Re and Im column of each frequency
            k = mu.shape[1]
            wr = np.abs(w[:k]).max(axis=1)
            wi = np.abs(w[k:2 * k]).max(axis=1)
            energy = np.maximum(wr, wi)
            order = np.argsort(-energy)
            print(f"  |mu_omega| percentiles: "
                  f"{np.round(np.percentile(np.abs(mu), [10, 50, 90]), 2)}")
            print(f"  sd_omega percentiles:  "
                  f"{np.round(np.percentile(sd, [10, 50, 90]), 3)}")
            print("  top-8 features by |w|: (mu, sd, |w|, damp@0.25)")
            for idx in order[:8]:
                m = mu[:, idx]
                s = sd[:, idx]
                damp = float(np.exp(-0.5 * np.sum(s**2) * 0.25**2))
                print(f"    mu={np.round(m, 2)} sd={np.round(s, 3)} "
                      f"|w|={energy[idx]:.3f} damp={damp:.3f}")


if __name__ == "__main__":
    main()
