"""PRCC sensitivity of information C's spread around the fitted parameters.

Run from the repository root:  python3 demos/03_sensitivity.py
Writes demos/out/prcc_*.svg.  About 20 s on one core.
"""

from pathlib import Path

from dtsfi import SamplingPlan, SensitivityScenario, load_fixture, published_params, reference_fits, run_sensitivity
from dtsfi.estimation import phase1_trajectory
from dtsfi.io import posting_gap
from dtsfi.svg import bar_chart

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

pub, ref = published_params(), reference_fits()
b, c = load_fixture("B"), load_fixture("C")
tau = posting_gap(b, c)
old = phase1_trajectory(pub["B_phase1"], b.counts[0], tau + 1.0)

# 1000 Latin hypercube samples, each parameter within +-50% of the fit
base = ref["C_lti"]
plan = SamplingPlan.around(base, spread=0.5, n=1000, seed=0)
table = run_sensitivity(base, plan, SensitivityScenario("lti", old, tau, c.counts[0]))

print("PRCC (rows: parameters, columns: indices)")
print(f"{'':>8}" + "".join(f"{k:>9}" for k in table.indices))
for i, p in enumerate(table.parameters):
    print(f"{p:>8}" + "".join(f"{v:9.2f}" for v in table.values[i]))
print("samples used per index:", dict(zip(table.indices, table.n_used.tolist())))

for index in ("r0", "f2max", "c2_final"):
    col = table.column(index)
    (out / f"prcc_{index}.svg").write_text(
        bar_chart(list(col), list(col.values()), title=f"PRCC against {index}", ylabel="PRCC"),
        encoding="utf-8")
