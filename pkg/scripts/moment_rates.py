"""E[Y_t]/t and E[Y_t^2]/t^2 from the series against their long-time limits."""
import argparse
import csv
import sys
from dataclasses import dataclass

from rsgbm import TwoStateModel, asymptotic_rates, lnx_moments


@dataclass
class RateConfig:
    lambdas: tuple = (1.0, 2.0)
    delta: tuple = (0.08, -0.12)
    sigma: tuple = (0.2, 0.2)
    t_grid: tuple = (1.0, 5.0, 10.0, 50.0, 100.0, 200.0)


def main(cfg):
    m = TwoStateModel.from_deltas(*cfg.lambdas, cfg.delta, cfg.sigma)
    rate, rate2 = asymptotic_rates(m)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["t", "mean_over_t", "gap", "second_over_t2", "gap2", "terms"])
    for t in cfg.t_grid:
        r = lnx_moments(m, t)
        w.writerow([t] + [format(v, ".10g") for v in
                          (r.mean / t, r.mean / t - rate, r.second_moment / t ** 2,
                           r.second_moment / t ** 2 - rate2)] + [r.terms_used])


if __name__ == "__main__":
    argparse.ArgumentParser(description=__doc__).parse_args()
    main(RateConfig())
