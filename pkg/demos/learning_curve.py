"""Noiseless constrained least squares on relu random features over S^2.

Runs a small learning-curve sweep and reports the mean test error per n.
The same sweep is available as ``fpidual learn-curve --config
demos/configs/learn_curve.json``.
"""

import numpy as np

from fpidual.experiments import ExperimentConfig, run


def main():
    cfg = ExperimentConfig(mode="learn-curve", d=3, p=2.0, N=1024, M=1024, n_test=2048,
                           n=(32, 128, 512), m=(256,), trials=3, seed=1)
    recs = run(cfg)
    for n in cfg.n:
        errs = [r.l2_error for r in recs if r.n == n]
        gaps = [r.certificate for r in recs if r.n == n]
        print(f"n={n:4d}  mean L2 error {np.mean(errs):.3e}  max FW gap {max(gaps):.1e}")


if __name__ == "__main__":
    main()
