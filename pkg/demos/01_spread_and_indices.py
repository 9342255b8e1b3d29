"""Simulate the three bundled series and summarise the new information's spread.

Run from the repository root:  python3 demos/01_spread_and_indices.py
Writes demos/out/spread.svg.
"""

from pathlib import Path

import numpy as np

from dtsfi import (
    IntegrationConfig,
    extract_indices,
    handoff_lti,
    load_fixture,
    published_params,
    reference_fits,
)
from dtsfi.estimation import phase1_trajectory, predict_phase1
from dtsfi.integrator import integrate
from dtsfi.io import posting_gap
from dtsfi.models import Model
from dtsfi.svg import line_plot

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

pub, ref = published_params(), reference_fits()
a, b, c = (load_fixture(x) for x in "ABC")

# %% Information A on its own, with a stand-alone fit to the whole series
pred_a = predict_phase1(ref["A_phase1"], a)
print(f"A: observed final {a.counts[-1]}, model {pred_a[-1]:.0f}")

# %% Information C, posted while B had settled: hand B's immune classes over
tau = posting_gap(b, c)
old = phase1_trajectory(pub["B_phase1"], b.counts[0], tau + 1.0)
start = handoff_lti(old, tau, ref["C_lti"].s20, c.counts[0])
print(f"C posted {tau:.3f} h after B; inactive/direct immune of B at that time "
      f"{start.i1_plus:.0f}/{start.i1_minus:.0f}")

traj = integrate(Model.LTI, start, ref["C_lti"], IntegrationConfig(0.01, 48.0))
rep = extract_indices(traj)
for key, value in rep.to_dict().items():
    print(f"  {key:>22}: {value}")

# %% model against data
t = np.linspace(0, c.t[-1], 200)
model_c = np.interp(t, traj.times, traj["c2"])
(out / "spread.svg").write_text(line_plot(
    t, {"model C2": model_c}, title="information C: cumulative forwards",
    xlabel="hours since posting", ylabel="users", markers=False), encoding="utf-8")
print("observed C at data times vs model:")
for tk, ck in zip(c.times, c.counts):
    print(f"  {tk:5.2f} h  {ck:6d}  {np.interp(tk, traj.times, traj['c2']):8.0f}")
