"""Trait model selection on synthetic cohorts: nationality drives pi, d is noise.

Reports, over several cohorts, how often nationality ranks first for pi
with weight > 0.9 and how often Null sits in the d top set.
"""

import argparse

import numpy as np

from turntaker.fitter import fit
from turntaker.model import TeamParams, TurnSequence
from turntaker.simulator import SimConfig, ensemble_array
from turntaker.stats import Nationality, Sex, TraitRecord, rank_trait_models

SIZES = [3, 3, 3, 3, 4, 4, 4]


def cohort(seed, turns):
    rng = np.random.default_rng(seed)
    records, pi_hat, d_hat = [], {}, {}
    for t, size in enumerate(SIZES):
        members = [f"t{t}m{j}" for j in range(size)]
        american = [(j + t) % 2 == 0 for j in range(size)]
        team = TeamParams.from_arrays(members, np.where(american, 3.0, 1.0), rng.uniform(0.5, 2.5, size))
        for m, am in zip(members, american):
            e, a, c = rng.normal(3.5, 0.7, 3)
            sex = Sex.MALE if rng.random() < 0.5 else Sex.FEMALE
            records.append(TraitRecord(m, f"t{t}", e, a, c, sex, Nationality.AMERICAN if am else Nationality.NON_AMERICAN))
        blocks = ensemble_array(team, SimConfig(1, seed * 100 + t, replications=1), meeting_lengths=[turns // 3] * 3)
        res = fit([TurnSequence(team.roster, b[0]) for b in blocks], team.roster, "full")
        for m, p in zip(members, res.team.params):
            pi_hat[m], d_hat[m] = p.pi, p.d
    return rank_trait_models(records, pi_hat, "pi"), rank_trait_models(records, d_hat, "d")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cohorts", type=int, default=20)
    ap.add_argument("--turns", type=int, default=2400, help="turns per team")
    args = ap.parse_args(argv)

    nat_first = null_top = 0
    for seed in range(args.cohorts):
        pi_rank, d_rank = cohort(seed, args.turns)
        first = pi_rank.rows[0]
        nat_first += first.name == "Nationality" and first.weight > 0.9
        null_top += "Null" in d_rank.top_set()
        if seed == 0:
            for rk in (pi_rank, d_rank):
                print(f"target {rk.target}")
                for r in rk.rows:
                    print(f"  {'*' if r.top else ' '} {r.name:<18} AICc={r.aicc:8.2f} delta={r.delta:6.2f} w={r.weight:.3f}")
    print(f"\nnationality first with w > 0.9: {nat_first}/{args.cohorts}")
    print(f"Null in d top set:              {null_top}/{args.cohorts}")


if __name__ == "__main__":
    main()
