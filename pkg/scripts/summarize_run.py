"""Print a short summary of an output directory written by `gamecontrol run`.

    python3 scripts/summarize_run.py runs/small_dsm
"""
import csv
import json
import sys
from pathlib import Path


def main(out):
    out = Path(out)
    with open(out / "metrics.csv") as fh:
        rows = list(csv.DictReader(fh))
    modes = dict.fromkeys(r["mode"] for r in rows)
    for mode in modes:
        sub = [r for r in rows if r["mode"] == mode]
        first, last = sub[0], sub[-1]
        line = (f"{mode:>14}: |Ax - l*|^2  t={first['t']}: {float(first['mean_violation_sq']):.4g}"
                f"  t={last['t']}: {float(last['mean_violation_sq']):.4g}")
        if "mean_cost" in last:
            line += f"  Phi={float(last['mean_cost']):.4g}  sum r={float(last['mean_sum_rewards']):.4g}"
        print(line)

    diag = json.loads((out / "diagnostics.json").read_text())
    if "constants" in diag:
        print("constants:", diag["constants"])
    for w in diag.get("warnings", []):
        print("warning:", w)
    for c in diag.get("checks", []):
        print(f"check {c['name']}: worst margin {c['worst_margin']:.3e} passed={c['passed']}")
    fit = diag.get("rate_fit")
    if fit and "slope" in fit:
        print(f"rate fit on [{fit['t_min']:g}, {fit['t_max']:g}]: slope {fit['slope']:.4f}, r2 {fit['r2']:.3f}")
    gap = diag.get("ne_gap")
    if gap:
        for t, g in zip(gap["t"], gap["mean_gap_sq"]):
            print(f"ne_gap^2 t={t}: {g:.4g}")
    manifest = json.loads((out / "manifest.json").read_text())
    bad = [r for r in manifest["realizations"] if r["status"] != "ok"]
    print(f"{len(manifest['realizations'])} realizations, {len(bad)} diverged, {manifest['wall_time_s']:.1f} s")


if __name__ == "__main__":
    if len(sys.argv) != 2:
        raise SystemExit(__doc__)
    main(sys.argv[1])
