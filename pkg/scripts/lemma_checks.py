"""Check the g-map and equilibrium-map inequalities on a small DSM instance.

    python3 scripts/lemma_checks.py --players 5 --dim 3 --pairs 200
"""
import argparse
import json

import numpy as np

from gamecontrol import GMapParams
from gamecontrol.diagnostics import (
    check_cocoercivity,
    check_g_nonexpansive,
    check_ne_lipschitz,
    estimate_lipschitz,
    estimate_monotonicity,
)
from gamecontrol.scenarios import DsmParams, gen_dsm


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--players", type=int, default=5)
    ap.add_argument("--dim", type=int, default=3)
    ap.add_argument("--pairs", type=int, default=200)
    ap.add_argument("--samples", type=int, default=1000, help="samples for mu_hat and L_hat")
    ap.add_argument("--alpha-range", type=float, default=5.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    sc = gen_dsm(DsmParams(num_players=args.players, dim=args.dim), seed=args.seed)
    rng = np.random.default_rng(args.seed)
    mu = estimate_monotonicity(sc.game, args.samples, rng)
    lip = estimate_lipschitz(sc.game, args.samples, rng)
    print(f"mu_hat = {mu:.6g}  L_hat = {lip:.6g}  ||A|| = {sc.constraint.a_norm:.6g}")
    if mu <= 0:
        raise SystemExit("sampled game is not strongly monotone; the checks need mu_hat > 0")

    params = GMapParams.from_constants(mu, sc.constraint.a_norm)
    kw = dict(num_pairs=args.pairs, alpha_range=args.alpha_range, lipschitz=lip)
    reports = [
        check_g_nonexpansive(sc.game, sc.constraint, params, rng=np.random.default_rng(1), **kw),
        check_cocoercivity(sc.game, sc.constraint, mu_hat=mu, rng=np.random.default_rng(1), **kw),
        check_ne_lipschitz(sc.game, sc.constraint, rng=np.random.default_rng(1), mu=mu, **kw),
    ]
    for rep in reports:
        print(rep.line())
    print(json.dumps([r.to_dict() for r in reports], indent=2))


if __name__ == "__main__":
    main()
