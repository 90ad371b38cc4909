"""Coverage of observed pattern statistics by full- and reduced-model ensembles.

Observed teams are simulated from a memory model, then both variants are
fitted and asked to reproduce speaking, ABA and long dyadic proportions.
Covered counts are compared with a Yates-corrected chi-squared test.
"""

import argparse

import numpy as np

from turntaker.fitter import FitOptions, fit
from turntaker.model import TeamParams, TurnSequence
from turntaker.patterns import STATISTICS, PatternEnsemble, coverage_report, pattern_report
from turntaker.simulator import SimConfig, ensemble_array
from turntaker.stats import StatsError, chi_squared_yates


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--teams", type=int, default=6)
    ap.add_argument("--replications", type=int, default=2000)
    ap.add_argument("--turns", type=int, default=1500)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    covered = {v: {s: [0, 0] for s in STATISTICS} for v in ("full", "reduced")}
    for k in range(args.teams):
        rng = np.random.default_rng([args.seed, k])
        n = int(rng.integers(3, 6))
        team = TeamParams.from_arrays(
            [f"m{i}" for i in range(n)], rng.dirichlet(np.full(n, 2.0)), rng.uniform(1.0, 3.0, n)
        )
        lengths = [args.turns // 3] * 3
        blocks = ensemble_array(team, SimConfig(1, 10_000 + k, replications=1), meeting_lengths=lengths)
        data = [TurnSequence(team.roster, b[0]) for b in blocks]
        observed = pattern_report(data, team.roster)
        for variant in ("full", "reduced"):
            fitted = fit(data, team.roster, variant, FitOptions(restarts=4)).team
            ens_blocks = ensemble_array(fitted, SimConfig(1, args.seed, args.replications), lengths)
            rep = coverage_report(observed, PatternEnsemble.from_arrays(ens_blocks, team.roster), variant=variant)
            for s in STATISTICS:
                yes, no = rep.counts(s)
                covered[variant][s][0] += yes
                covered[variant][s][1] += no

    for s in STATISTICS:
        table = [covered["full"][s], covered["reduced"][s]]
        try:
            stat, p = chi_squared_yates(table)
            test = f"chi2={stat:6.2f} p={p:.2g}"
        except StatsError:
            test = "chi2 undefined"
        f, r = table
        print(f"{s:<9} full {f[0]}/{sum(f)}  reduced {r[0]}/{sum(r)}  {test}")


if __name__ == "__main__":
    main()
