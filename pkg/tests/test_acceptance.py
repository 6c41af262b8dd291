"""Acceptance gate: one PASS/FAIL line per criterion, at the stated tolerances."""
import csv
import json
import time
from pathlib import Path

import numpy as np
import pytest

from gamecontrol import ActionSet, ConstraintSpec, GMapParams, solve_ne
from gamecontrol.diagnostics import check_cocoercivity, check_g_nonexpansive, estimate_lipschitz, estimate_monotonicity
from gamecontrol.projection import project, project_oracle
from gamecontrol.runner import EXIT_OK, main
from gamecontrol.scenarios import DsmParams, gen_dsm

from conftest import ACCEPTANCE_LINES, Decoupled, scalar_game

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def report(number, passed, detail):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert passed, line


def final_rows(metrics_path):
    with open(metrics_path) as fh:
        rows = list(csv.DictReader(fh))
    by_mode = {}
    for r in rows:
        by_mode.setdefault(r["mode"], []).append(r)
    return by_mode


@pytest.fixture(scope="session")
def small_dsm_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("small_dsm")
    start = time.perf_counter()
    status = main(["run", str(CONFIGS / "small_dsm.json"), "--out", str(out)])
    return out, status, time.perf_counter() - start


@pytest.fixture(scope="session")
def lemma_setup():
    sc = gen_dsm(DsmParams(num_players=5, dim=3), seed=0)
    rng = np.random.default_rng(0)
    mu = estimate_monotonicity(sc.game, 1000, rng)
    lip = estimate_lipschitz(sc.game, 1000, rng)
    return sc, mu, lip


def test_criterion_01_projection_oracle():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        d = int(rng.integers(1, 5))
        kind = rng.integers(3)
        upper = rng.uniform(0.0, 2.0, d)
        cap = rng.uniform(0.0, 3.0)
        s = [ActionSet.box(upper), ActionSet.capped_box(upper, cap), ActionSet.capped_simplex(cap, d)][kind]
        p = rng.uniform(-2.0, 3.0, d)
        worst = max(worst, float(np.max(np.abs(project(s, p) - project_oracle(s, p)))))
    elapsed = time.perf_counter() - start
    report(1, worst <= 1e-8 and elapsed < 5.0,
           f"max |project - oracle| = {worst:.2e} (<= 1e-8), {elapsed:.2f} s (< 5 s)")


def test_criterion_02_ne_oracle():
    start = time.perf_counter()
    game = scalar_game()
    con = ConstraintSpec([[1.0]], [1.0])
    worst = 0.0
    for alpha in (-1.0, 0.0, 1.0, 2.0, 5.0):
        x = solve_ne(game, con, [alpha], tol=1e-11).x_star[0]
        worst = max(worst, abs(x - np.clip((2.0 - alpha) / 2.0, 0.0, 10.0)))
    dec = Decoupled(num_players=4, dim=3, k=2, seed=1)
    rng = np.random.default_rng(5)
    for _ in range(10):
        alpha = rng.uniform(-2.0, 2.0, 2)
        x = solve_ne(dec.game, dec.constraint, alpha, tol=1e-11).x_star
        worst = max(worst, float(np.max(np.abs(x - dec.closed_form(alpha)))))
    elapsed = time.perf_counter() - start
    report(2, worst <= 1e-8 and elapsed < 5.0,
           f"max |x* - closed form| = {worst:.2e} (<= 1e-8), {elapsed:.2f} s (< 5 s)")


def test_criterion_03_g_nonexpansive(lemma_setup):
    sc, mu, lip = lemma_setup
    start = time.perf_counter()
    params = GMapParams.from_constants(mu, sc.constraint.a_norm)
    rep = check_g_nonexpansive(sc.game, sc.constraint, params, num_pairs=200, alpha_range=5.0,
                               rng=np.random.default_rng(3), lipschitz=lip)
    elapsed = time.perf_counter() - start
    report(3, rep.samples == 200 and rep.worst_margin <= 1e-6 and elapsed < 60.0,
           f"g-map worst margin = {rep.worst_margin:.3e} over {rep.samples} pairs (<= 1e-6), "
           f"mu_hat = {mu:.4g}, {elapsed:.1f} s (< 60 s)")


def test_criterion_04_cocoercivity(lemma_setup):
    sc, mu, lip = lemma_setup
    start = time.perf_counter()
    rep = check_cocoercivity(sc.game, sc.constraint, mu_hat=mu, num_pairs=200, alpha_range=5.0,
                             rng=np.random.default_rng(3), lipschitz=lip)
    elapsed = time.perf_counter() - start
    report(4, rep.samples == 200 and rep.worst_margin <= 1e-6 and elapsed < 60.0,
           f"co-coercivity worst margin = {rep.worst_margin:.3e} over {rep.samples} pairs (<= 1e-6), "
           f"{elapsed:.1f} s (< 60 s)")


def test_criterion_05_convergence(small_dsm_run):
    out, status, elapsed = small_dsm_run
    rows = final_rows(out / "metrics.csv")

    def value_at(mode, t):
        return next(float(r["mean_violation_sq"]) for r in rows[mode] if int(r["t"]) == t)

    c0, c1 = value_at("controlled", 100), value_at("controlled", 100_000)
    u0, u1 = value_at("uncontrolled", 100), value_at("uncontrolled", 100_000)
    # "no comparable decrease": the uncontrolled run does not even lose a factor 10
    passed = status == EXIT_OK and c1 <= 0.01 * c0 and u1 > 0.1 * u0 and elapsed < 600.0
    report(5, passed,
           f"controlled {c0:.4g} -> {c1:.4g} (ratio {c1 / c0:.2e} <= 0.01); "
           f"uncontrolled {u0:.4g} -> {u1:.4g} (ratio {u1 / u0:.3f} > 0.1); run {elapsed:.0f} s (< 600 s)")


def test_criterion_06_rate(small_dsm_run):
    out, _, _ = small_dsm_run
    fit = json.loads((out / "diagnostics.json").read_text())["rate_fit"]
    report(6, "slope" in fit and fit["slope"] <= -0.20,
           f"fitted slope on [1e3, 1e5] = {fit.get('slope', float('nan')):.4f} (<= -0.20), r2 = {fit.get('r2', float('nan')):.3f}")


def test_criterion_07_ne_tracking(small_dsm_run):
    out, _, _ = small_dsm_run
    gap = json.loads((out / "diagnostics.json").read_text())["ne_gap"]
    t, g = gap["t"], gap["mean_gap_sq"]
    ratio = g[t.index(1000)] / g[t.index(10000)]
    report(7, len(t) == 10 and 1.6 <= ratio <= 8.0,
           f"mean ne_gap^2 ratio t=1e3 / t=1e4 = {ratio:.3f} (in [1.6, 8]) over {len(t)} snapshot times")


def test_ne_violation_decays_per_decade(small_dsm_run):
    # not a numbered criterion: slow-timescale shape on the same run
    out, _, _ = small_dsm_run
    gap = json.loads((out / "diagnostics.json").read_text())["ne_gap"]
    t, v = gap["t"], gap["mean_ne_violation_sq"]
    assert v[t.index(1000)] / v[t.index(10000)] >= 1.3


def test_criterion_08_quadratic(tmp_path):
    start = time.perf_counter()
    status = main(["run", str(CONFIGS / "small_quadratic.json"), "--out", str(tmp_path)])
    elapsed = time.perf_counter() - start
    rows = final_rows(tmp_path / "metrics.csv")
    last = {mode: r[-1] for mode, r in rows.items()}
    phi_c, phi_u = float(last["controlled"]["mean_cost"]), float(last["uncontrolled"]["mean_cost"])
    sr_c, sr_g = float(last["controlled"]["mean_sum_rewards"]), float(last["direct-global"]["mean_sum_rewards"])
    passed = status == EXIT_OK and phi_c < phi_u and sr_c > sr_g and elapsed < 300.0
    report(8, passed,
           f"Phi controlled {phi_c:.4g} < uncontrolled {phi_u:.4g}; "
           f"sum r controlled {sr_c:.4g} > direct-global {sr_g:.4g}; {elapsed:.0f} s (< 300 s)")


def test_criterion_09_determinism(tmp_path):
    start = time.perf_counter()
    cfg = str(CONFIGS / "small_quadratic.json")
    blobs = []
    for k, threads in enumerate([1, 1, 8]):
        out = tmp_path / f"run{k}"
        status = main(["run", cfg, "--out", str(out), "--horizon", "2000", "--realizations", "8",
                       "--threads", str(threads)])
        assert status == EXIT_OK
        blobs.append((out / "metrics.csv").read_bytes())
    elapsed = time.perf_counter() - start
    report(9, blobs[0] == blobs[1] == blobs[2] and elapsed < 60.0,
           f"metrics.csv identical across 2 runs and threads {{1, 8}} ({len(blobs[0])} bytes), {elapsed:.1f} s (< 60 s)")


def test_criterion_10_full_size_preset(tmp_path):
    preset = json.loads((CONFIGS / "full_dsm.json").read_text())
    params = preset["scenario"]["params"]
    assert (params["num_players"], params["dim"], preset["realizations"]) == (1000, 24, 100)
    start = time.perf_counter()
    status = main(["run", str(CONFIGS / "full_dsm.json"), "--out", str(tmp_path),
                   "--horizon", "1000", "--realizations", "1", "--mode", "controlled"])
    elapsed = time.perf_counter() - start
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    ok = [r["status"] for r in manifest["realizations"]] == ["ok"]
    report(10, status == EXIT_OK and ok,
           f"N=1000, d=24 preset: 1e3 iterations of 1 realization, status {manifest['realizations'][0]['status']}, {elapsed:.1f} s")
