"""Command-line interface: ``dtsfi {simulate,fit,indices,prcc,delay-scan}``.

Parameter arguments accept a JSON file path or a bundled set written as
``published:KEY`` or ``reference:KEY`` (see :func:`dtsfi.io.published_params`
and :func:`dtsfi.io.reference_fits`).  Dataset arguments accept a CSV path or
``fixture:A``/``fixture:B``/``fixture:C``.

Exit status is 0 on success, 1 on invalid input and 2 on numerical failure;
failures print a JSON object to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io as dio
from . import svg
from .errors import DomainError, InsufficientDataError, IntegrationError, ValidationError
from .estimation import FitSpec, baseline_dict, fit, phase1_trajectory
from .indices import extract_indices
from .integrator import IntegrationConfig, Trajectory, integrate
from .models import (
    LtiPhase2State,
    Model,
    Phase1Params,
    Phase1State,
    StiPhase2State,
    handoff_lti,
    handoff_sti,
)
from .scenarios import delay_scan
from .sensitivity import INDICES, SamplingPlan, SensitivityScenario, run_sensitivity

log = logging.getLogger("dtsfi")

# initial forwarder counts may ride along in a parameter file under these keys
INITIAL_KEYS = ("f10", "f20")


# --------------------------------------------------------------------------
# Argument resolution
# --------------------------------------------------------------------------


def _load_mapping(ref):
    prefix, sep, key = ref.partition(":")
    if sep and prefix in ("published", "reference"):
        table = dio.published_params() if prefix == "published" else dio.reference_fits()
        if key not in table:
            raise ValidationError(f"no bundled parameter set {ref!r}; have {sorted(table)}")
        return dio.params_to_mapping(table[key])
    with open(ref, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ValidationError(f"{ref}: expected a JSON object")
    return {k: v for k, v in raw.items() if not k.startswith("_")}


def load_params_arg(ref):
    """``(params, initial)``: parameter object(s) and any ``f10``/``f20`` entries."""
    raw = _load_mapping(ref)
    initial = {k: float(raw.pop(k)) for k in INITIAL_KEYS if k in raw}
    return dio.params_from_mapping(raw), initial


def load_data_arg(ref):
    prefix, sep, key = ref.partition(":")
    if sep and prefix == "fixture":
        return dio.load_fixture(key)
    return dio.load_dataset(ref)


def _phase1(params, what):
    if isinstance(params, tuple):
        params = params[0]
    if not isinstance(params, Phase1Params):
        raise ValidationError(f"{what} must hold phase-1 parameters")
    return params


def _phase2_pair(params, model):
    """Split a parameter object into ``(joint phase-1, phase-2)`` for ``model``."""
    if model is Model.STI:
        if not isinstance(params, tuple):
            raise ValidationError("STI needs both phase-1 and phase-2 keys in one file")
        return params
    if isinstance(params, tuple):
        return params
    if isinstance(params, Phase1Params):
        raise ValidationError("LTI needs phase-2 parameters")
    return None, params


def _old_trajectory(args, t_end):
    p_old, init = load_params_arg(args.old_params)
    p_old = _phase1(p_old, "--old-params")
    f0 = args.old_f0 if args.old_f0 is not None else init.get("f10", 1.0)
    return phase1_trajectory(p_old, f0, t_end, IntegrationConfig(args.step, t_end, 1))


def _write(path, text):
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _dump_json(obj):
    return json.dumps(dio.to_jsonable(obj), indent=2, allow_nan=False) + "\n"


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------


def cmd_simulate(args):
    model = Model(args.model)
    params, init = load_params_arg(args.params)
    cfg = IntegrationConfig(args.step, args.t_end, args.record_every)
    if model is Model.PHASE1:
        params = _phase1(params, "--params")
        f0 = args.f0 if args.f0 is not None else init.get("f10", 1.0)
        start = Phase1State.seeded(params.s10, f0)
    else:
        p1, p2 = _phase2_pair(params, model)
        f0 = args.f0 if args.f0 is not None else init.get("f20", 1.0)
        if args.old_params is not None:
            if args.tau is None:
                raise ValidationError("--old-params needs --tau")
            old = _old_trajectory(args, max(args.tau, args.step))
            if model is Model.LTI:
                start = handoff_lti(old, args.tau, p2.s20, f0)
            else:
                start = handoff_sti(old, args.tau, f0, s_pool=p2.s20)
        elif model is Model.LTI:
            start = LtiPhase2State(p2.s20, 0.0, 0.0, f0, 0.0, f0)
        else:
            f1 = init.get("f10", 0.0)
            start = StiPhase2State(p2.s20, f1, 0.0, 0.0, f0, 0.0, f1, f0)
        params = p2 if model is Model.LTI else (p1, p2)
    traj = integrate(model, start, params, cfg)
    _write(args.out, traj.to_csv())
    log.info("conservation drift %.3g", traj.diagnostics["conservation_drift"])
    return 0


def cmd_indices(args):
    text = sys.stdin.read() if args.trajectory == "-" else Path(args.trajectory).read_text(encoding="utf-8")
    traj = Trajectory.from_csv(text)
    report = extract_indices(traj, args.f2star)
    _write(args.out, _dump_json(report.to_dict()))
    return 0


def _fit_spec(args):
    model = Model(args.model)
    spec = {}
    if args.spec:
        with open(args.spec, encoding="utf-8") as fh:
            spec = {k: v for k, v in json.load(fh).items() if not k.startswith("_")}
    data = [load_data_arg(d) for d in args.data]
    default_base = {Model.PHASE1: "published:A_early", Model.LTI: "published:C_lti",
                    Model.STI: "published:AB_sti"}[model]
    base_ref = args.baseline or spec.get("baseline", default_base)
    if isinstance(base_ref, dict):
        base_params = dio.params_from_mapping(base_ref)
    else:
        base_params, _ = load_params_arg(base_ref)
    if model is Model.PHASE1 and isinstance(base_params, tuple):
        base_params = base_params[0]
    baseline = baseline_dict(base_params)
    kwargs = {
        "free": tuple(args.free.split(",")) if args.free else tuple(spec.get("free", ())),
        "bounds": {k: tuple(v) for k, v in spec.get("bounds", {}).items()},
        "restarts": args.restarts if args.restarts is not None else spec.get("restarts", 32),
        "seed": args.seed,
    }
    for key in ("maxfev", "xatol", "fatol", "polish", "start_spread"):
        if key in spec:
            kwargs[key] = spec[key]
    if args.maxfev is not None:
        kwargs["maxfev"] = args.maxfev
    kwargs["cfg"] = IntegrationConfig(args.step, 1.0)

    tau = args.tau if args.tau is not None else spec.get("tau")
    if model is Model.LTI:
        if args.old_params is None:
            raise ValidationError("LTI fits need --old-params for the old information")
        if tau is None:
            if args.old_data is None:
                raise ValidationError("give --tau or --old-data to place the new posting")
            old_data = load_data_arg(args.old_data)
            tau = dio.posting_gap(old_data, data[0])
            if args.old_f0 is None:
                args.old_f0 = float(old_data.counts[0])
        kwargs["phase1_traj"] = _old_trajectory(args, tau + float(data[0].t[-1]) + 1.0)
        kwargs["tau"] = tau
    elif model is Model.STI:
        if len(data) != 2:
            raise ValidationError("STI fits need --data for the old and the new information")
        kwargs["tau"] = tau if tau is not None else dio.posting_gap(data[0], data[1])
        if args.early_params:
            kwargs["p1_early"] = _phase1(load_params_arg(args.early_params)[0], "--early-params")
    return FitSpec(model, tuple(data), baseline, **kwargs)


def cmd_fit(args):
    result = fit(_fit_spec(args))
    if result.params is None:
        raise IntegrationError("no restart produced a finite objective")
    _write(args.out, _dump_json(result.to_dict()))
    return 0


def _scenario(args, model):
    params, init = load_params_arg(args.baseline)
    p1, p2 = _phase2_pair(params, model)
    horizon = max(args.tau, args.step)
    old = _old_trajectory(args, horizon)
    seed_f2 = args.seed_f2 if args.seed_f2 is not None else init.get("f20", 1.0)
    scenario = SensitivityScenario(model, old, args.tau, seed_f2, p1=p1, horizon=args.horizon,
                                   step=args.step)
    return p2, scenario


def cmd_prcc(args):
    model = Model(args.model)
    baseline, scenario = _scenario(args, model)
    plan = SamplingPlan.around(baseline, args.spread, n=args.n, seed=args.seed)
    table = run_sensitivity(baseline, plan, scenario)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "prcc.csv").write_text(table.to_csv(), encoding="utf-8")
    for index in INDICES:
        (out / f"scatter_{index}.csv").write_text(table.scatter_csv(index), encoding="utf-8")
        col = table.column(index)
        (out / f"prcc_{index}.svg").write_text(
            svg.bar_chart(list(col), list(col.values()), title=f"PRCC against {index}", ylabel="PRCC"),
            encoding="utf-8")
        pairs = table.scatter(index)
        (out / f"scatter_{index}.svg").write_text(
            svg.scatter_panels({p: (v[:, 0], v[:, 1]) for p, v in pairs.items()},
                               title=f"rank scatter against {index}", xlabel="parameter rank",
                               ylabel=f"{index} rank"),
            encoding="utf-8")
    summary = {"n": plan.n, "n_failed": table.n_failed, "n_clamped": table.n_clamped,
               "n_used": dict(zip(INDICES, table.n_used.tolist())), "seed": args.seed}
    _write(out / "summary.json", _dump_json(summary))
    return 0


def cmd_delay_scan(args):
    p_old, init_old = load_params_arg(args.old_params)
    p_old = _phase1(p_old, "--old-params")
    params, init = load_params_arg(args.params)
    p1_joint, p2 = _phase2_pair(params, Model.LTI)
    taus = [float(t) for t in args.taus.split(",")]
    seed_f1 = args.old_f0 if args.old_f0 is not None else init_old.get("f10", 1.0)
    seed_f2 = args.seed_f2 if args.seed_f2 is not None else init.get("f20", 1.0)
    scan = delay_scan(p_old, p2, taus, seed_f2, seed_f1=seed_f1, p1_joint=p1_joint,
                      horizon=args.horizon, cfg=IntegrationConfig(args.step, args.horizon, 1))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "scan.csv").write_text(scan.to_csv(), encoding="utf-8")
    (out / "scan.svg").write_text(
        svg.line_plot(scan.taus, {"final size": scan.column("c2_final")},
                      title="final forwarding count against posting delay",
                      xlabel="posting delay (h)", ylabel="cumulative forwards"),
        encoding="utf-8")
    return 0


# --------------------------------------------------------------------------
# Parser and entry point
# --------------------------------------------------------------------------


def build_parser():
    ap = argparse.ArgumentParser(prog="dtsfi", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def old_args(p, required=False):
        p.add_argument("--old-params", required=required,
                       help="phase-1 parameters of the old information")
        p.add_argument("--old-f0", type=float, help="initial forwarders of the old information")

    p = sub.add_parser("simulate", help="integrate a model and write the trajectory CSV")
    p.add_argument("--model", required=True, choices=[m.value for m in Model])
    p.add_argument("--params", required=True)
    p.add_argument("--t-end", type=float, default=26.0)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--record-every", type=int, default=1)
    p.add_argument("--f0", type=float, help="initial forwarders of the simulated information")
    p.add_argument("--tau", type=float, help="posting time of the new information (hours)")
    old_args(p)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="least-squares fit to forwarding data, written as JSON")
    p.add_argument("--model", required=True, choices=[m.value for m in Model])
    p.add_argument("--data", action="append", required=True,
                   help="dataset CSV or fixture:X; repeat as old then new for sti")
    p.add_argument("--spec", help="JSON file with baseline, free, bounds, restarts, tau")
    p.add_argument("--baseline", help="parameter set used as the start centre and fixed values")
    p.add_argument("--free", help="comma-separated parameters to fit (default: all)")
    p.add_argument("--restarts", type=int)
    p.add_argument("--maxfev", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--old-data", help="old-information dataset, to read tau from the post times")
    p.add_argument("--early-params", help="old-information parameters before tau (sti)")
    old_args(p)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("indices", help="propagation indices of a phase-2 trajectory CSV")
    p.add_argument("--trajectory", required=True, help="trajectory CSV path or - for stdin")
    p.add_argument("--f2star", type=float, help="outbreak threshold (default 5%% of the peak)")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_indices)

    p = sub.add_parser("prcc", help="LHS/PRCC sensitivity around a baseline")
    p.add_argument("--model", required=True, choices=["lti", "sti"])
    p.add_argument("--baseline", required=True)
    p.add_argument("--tau", type=float, required=True)
    old_args(p, required=True)
    p.add_argument("--seed-f2", type=float, help="initial forwarders of the new information")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--spread", type=float, default=0.5)
    p.add_argument("--horizon", type=float, default=48.0)
    p.add_argument("--step", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_prcc)

    p = sub.add_parser("delay-scan", help="indices of the new information over posting delays")
    old_args(p, required=True)
    p.add_argument("--params", required=True,
                   help="phase-2 parameters, optionally with joint phase-1 keys for outbreak posts")
    p.add_argument("--taus", required=True, help="comma-separated posting delays in hours")
    p.add_argument("--seed-f2", type=float)
    p.add_argument("--horizon", type=float, default=48.0)
    p.add_argument("--step", type=float, default=1e-3)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_delay_scan)
    return ap


def _classify(exc):
    if isinstance(exc, (IntegrationError, InsufficientDataError, FloatingPointError)):
        return 2, "numerical"
    if isinstance(exc, (ValidationError, DomainError, ValueError, KeyError, TypeError, OSError)):
        return 1, "validation"
    return None


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with np.errstate(all="ignore"):
            return args.func(args)
    except Exception as exc:
        kind = _classify(exc)
        if kind is None:
            raise
        status, label = kind
        err = {"error": label, "type": type(exc).__name__, "message": str(exc), "exit_status": status}
        if isinstance(exc, IntegrationError):
            err["time"] = exc.time
        sys.stderr.write(json.dumps(dio.to_jsonable(err)) + "\n")
        return status


if __name__ == "__main__":
    sys.exit(main())
