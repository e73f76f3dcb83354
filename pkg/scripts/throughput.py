"""Time estimator throughput: full-size bank against a 100-point grid (diagnostic only)."""
import time

import numpy as np

from acceptability.estimator import rho_hat_batch
from acceptability.market import three_period_gbm
from acceptability.risk import shifted_normal_spec
from acceptability.sampler import build_bank
from acceptability.vcbound import plan_samples
from acceptability.weights import compute_constants


def main(workers=(1, 2)):
    w = compute_constants(three_period_gbm(), shifted_normal_spec())
    plan = plan_samples(w, 0.5, 0.05).with_kappas({(0, 1): 1_400_000, (1, -1): 10_500})
    t0 = time.perf_counter()
    bank = build_bank(w, plan, seed=1)
    print(f"bank {bank.sizes()} built in {time.perf_counter() - t0:.2f}s")
    r = np.random.default_rng(0)
    grid = np.column_stack([r.uniform(-1, 1, 100), r.uniform(0, 20, 100), np.zeros(100)])
    for k in workers:
        t0 = time.perf_counter()
        rho_hat_batch(w, bank, grid, workers=k)
        dt = time.perf_counter() - t0
        print(f"workers={k}: 100 grid points in {dt:.2f}s ({1.41e8 / dt:.3g} sample-points/s)")


if __name__ == "__main__":
    main()
