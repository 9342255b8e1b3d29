"""How the new information fares when it is posted earlier or later.

Run from the repository root:  python3 demos/04_delay_scan.py
Writes demos/out/delay_*.svg.
"""

from pathlib import Path

import numpy as np

from dtsfi import IntegrationConfig, delay_scan, published_params
from dtsfi.svg import line_plot

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)
pub = published_params()

# %% C-like information posted after B has settled: the final size barely moves
quasi = delay_scan(pub["B_phase1"], pub["C_lti"], np.arange(24.0, 45.0, 4.0), 20.0, seed_f1=15)
print(quasi.to_csv())

# %% B-like information posted while A is still spreading: earlier is bigger
p1, p2 = pub["AB_sti"]
burst = delay_scan(pub["A_early"], p2, [1.0, 1.5, 2.0, 2.5, 3.0], 15.0, seed_f1=47, p1_joint=p1,
                   horizon=24.0, cfg=IntegrationConfig(1e-4, 24.0))
print(burst.to_csv())

for name, scan in (("quasi_steady", quasi), ("outbreak", burst)):
    (out / f"delay_{name}.svg").write_text(line_plot(
        scan.taus, {"final size": scan.column("c2_final")}, title=f"{name.replace('_', '-')} posts",
        xlabel="posting delay (h)", ylabel="cumulative forwards"), encoding="utf-8")
