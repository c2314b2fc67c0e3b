"""Second variation of the penalized energy around the radial hedgehog.

    python3 scripts/hedgehog_sweep.py --n 64 --mu 50,200,800,3200 --out runs/sweep
"""
import argparse
from pathlib import Path

from ldg.hedgehog import instability_sweep
from ldg.io import write_json

p = argparse.ArgumentParser()
p.add_argument("--lam", type=float, default=1.0)
p.add_argument("--mu", default="50,200,800,3200")
p.add_argument("--delta", default="1,0.5,0.25,0.1")
p.add_argument("--n", type=int, default=64)
p.add_argument("--out", default="runs/sweep")
a = p.parse_args()

out = Path(a.out)
out.mkdir(parents=True, exist_ok=True)
rep = instability_sweep(a.lam, [float(x) for x in a.mu.split(",")],
                        [float(x) for x in a.delta.split(",")], n_grid=a.n)
rep.write_csv(out / "sweep.csv")
write_json(out / "sweep.json", rep.as_dict())
print(f"{'mu':>8} {'delta':>6} {'F2':>12} {'mu term':>12} {'limit':>12}")
for r in rep.rows:
    print(f"{r['mu']:8g} {r['delta']:6g} {r['value']:12.5f} {r['mu_term']:12.5f} "
          f"{r['harmonic_limit_term']:12.5f}")
print("first negative", rep.first_negative, "best delta", rep.best_delta)
