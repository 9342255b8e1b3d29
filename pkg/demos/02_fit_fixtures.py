"""Refit the bundled series and compare with the stored reference fits.

Run from the repository root:  python3 demos/02_fit_fixtures.py
Takes a few minutes on one core.  Pass --write to overwrite
src/dtsfi/data/reference_fits.json with the new values.
"""

import json
import sys
import time
from pathlib import Path

from dtsfi import FitSpec, fit, load_fixture, published_params, reference_fits
from dtsfi.estimation import (
    baseline_dict,
    ls_error_lti,
    ls_error_sti,
    phase1_trajectory,
    predict_lti,
    predict_sti,
)
from dtsfi.integrator import IntegrationConfig
from dtsfi.io import params_to_mapping, posting_gap

pub, stored = published_params(), reference_fits()
a, b, c = (load_fixture(x) for x in "ABC")
fits = {}


def report(name, result, extra=""):
    print(f"{name}: error {result.error:.6g} converged={result.converged} "
          f"evaluations={result.n_evaluations} {extra}")


# %% C against B's published stand-alone trajectory
t0 = time.perf_counter()
tau_bc = posting_gap(b, c)
old_b = phase1_trajectory(pub["B_phase1"], b.counts[0], tau_bc + c.t[-1] + 1.0)
res = fit(FitSpec("lti", (c,), baseline_dict(pub["C_lti"]), phase1_traj=old_b, tau=tau_bc))
fits["C_lti"] = res.params
report("C_lti", res, f"(published {ls_error_lti(pub['C_lti'], old_b, tau_bc, c):.4g}; "
       f"final {predict_lti(res.params, old_b, tau_bc, c)[-1]:.0f} vs {c.counts[-1]})")

# %% A before B was posted, then A and B jointly
tau_ab = posting_gap(a, b)
res = fit(FitSpec("phase1", (a.window(tau_ab),), baseline_dict(pub["A_early"])))
fits["A_early"] = early = res.params
report("A_early", res)

res = fit(FitSpec("sti", (a, b), baseline_dict(pub["AB_sti"]), tau=tau_ab, p1_early=early))
fits["AB_sti"] = res.params
c1, c2 = predict_sti(*res.params, tau_ab, a, b, p1_early=early)
published = ls_error_sti(*pub["AB_sti"], tau_ab, a, b, pub["A_early"], IntegrationConfig(1e-4, 1.0))
report("AB_sti", res, f"(published {published:.4g}; finals {c1[-1]:.0f}/{c2[-1]:.0f} "
       f"vs {a.counts[-1]}/{b.counts[-1]})")

# %% the whole A series with one parameter set; alpha1 runs into the default bound of 10
res = fit(FitSpec("phase1", (a,), baseline_dict(pub["A_early"]), bounds={"alpha1": (1e-8, 100.0)}))
fits["A_phase1"] = res.params
report("A_phase1", res)
print(f"total {time.perf_counter() - t0:.0f} s")

# %% compare with what ships in the package
for key, params in fits.items():
    new, old = params_to_mapping(params), params_to_mapping(stored[key])
    worst = max(abs(new[k] / old[k] - 1) for k in old if old[k])
    print(f"{key}: largest relative change against the stored fit {worst:.2e}")

if "--write" in sys.argv:
    notes = {
        "C_lti": "least-squares fit of C with the published B trajectory as the old information",
        "A_early": "least-squares fit of A on its rows before B was posted",
        "AB_sti": "least-squares fit of A and B jointly, A_early before B's post",
        "A_phase1": "least-squares fit of the whole A series, alpha1 bounded by 100",
    }
    target = Path(__file__).resolve().parents[1] / "src" / "dtsfi" / "data" / "reference_fits.json"
    payload = {k: {"_note": notes[k], **params_to_mapping(v)} for k, v in fits.items()}
    target.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {target}")
