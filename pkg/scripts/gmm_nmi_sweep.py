"""Clustering quality of the moment-based GMM fit against sample size.

For each seed a separated model is drawn; fits at every sample size are
scored by NMI on one shared held-out sample, so differences between sizes
reflect the fitted parameters. Prints the median per size and optionally
writes all rows to a TSV.

    python scripts/gmm_nmi_sweep.py --seeds 10 --sizes 10000,50000,200000
"""

import argparse
import statistics
from dataclasses import dataclass, field

import numpy as np

from givenscd.errors import GivensError
from givenscd.gmm import cluster_assign, fit_gmm, nmi, sample_gmm, separated_model


@dataclass
class SweepConfig:
    dim: int = 10
    k: int = 5
    sizes: list = field(default_factory=lambda: [10**4, 5 * 10**4, 10**5, 2 * 10**5])
    seeds: int = 10
    n_eval: int = 10**5
    separation: float = 5.0


def sweep(cfg: SweepConfig) -> list[tuple[int, int, float]]:
    rows = []
    for seed in range(cfg.seeds):
        s_model, s_eval, s_fit = np.random.SeedSequence(seed).spawn(3)
        model = separated_model(cfg.dim, cfg.k, s_model, separation=cfg.separation)
        X_eval, y_eval = sample_gmm(model, cfg.n_eval, s_eval)
        for n, s in zip(cfg.sizes, s_fit.spawn(len(cfg.sizes))):
            X, _ = sample_gmm(model, n, s)
            try:
                fit = fit_gmm(X, cfg.k, seed=seed).recovery.model
                score = nmi(y_eval, cluster_assign(X_eval, fit))
            except GivensError:
                score = float("nan")  # recovery failed at this size
            rows.append((seed, n, score))
    return rows


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, default=SweepConfig.seeds)
    p.add_argument("--sizes", default=None, help="comma-separated sample sizes")
    p.add_argument("--dim", type=int, default=SweepConfig.dim)
    p.add_argument("-k", type=int, default=SweepConfig.k)
    p.add_argument("--separation", type=float, default=SweepConfig.separation)
    p.add_argument("--tsv", default=None)
    args = p.parse_args()
    cfg = SweepConfig(dim=args.dim, k=args.k, seeds=args.seeds, separation=args.separation)
    if args.sizes:
        cfg.sizes = [int(s) for s in args.sizes.split(",")]

    rows = sweep(cfg)
    if args.tsv:
        with open(args.tsv, "w") as fh:
            fh.write("seed\tn\tnmi\n")
            for seed, n, score in rows:
                fh.write(f"{seed}\t{n}\t{score:.17g}\n")
    print(f"{'n':>8} {'median NMI':>11} {'min':>8} {'failed':>6}")
    for n in cfg.sizes:
        scores = [s for _, m, s in rows if m == n]
        ok = [s for s in scores if s == s]
        med = statistics.median(ok) if ok else float("nan")
        lo = min(ok) if ok else float("nan")
        print(f"{n:>8d} {med:>11.5f} {lo:>8.5f} {len(scores) - len(ok):>6d}")


if __name__ == "__main__":
    main()
