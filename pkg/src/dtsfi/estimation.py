"""Least-squares calibration of the SFI systems to cumulative forwarding data.

Objectives integrate the model on its own fixed grid, interpolate the
cumulative forwarding accumulator to the observation times and sum squared
residuals.  :func:`fit` minimises an objective with multi-start Nelder--Mead in
a transformed space where every box bound is enforced by construction.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import DomainError, IntegrationError, ValidationError
from .integrator import IntegrationConfig, Trajectory, simulate
from .models import (
    Model,
    Phase1Params,
    Phase1State,
    Phase2Params,
    handoff_lti,
    handoff_sti,
)
from .sensitivity import lhs_unit

__all__ = [
    "DEFAULT_BOUNDS",
    "FitSpec",
    "FitResult",
    "ls_error_phase1",
    "ls_error_lti",
    "ls_error_sti",
    "predict_phase1",
    "predict_lti",
    "predict_sti",
    "phase1_trajectory",
    "fit",
    "baseline_dict",
]

log = logging.getLogger(__name__)

PHASE1_NAMES = ("beta1", "p1", "alpha1", "s10")
PHASE2_NAMES = ("beta21", "beta22", "beta23", "m21", "m22", "m23", "p2", "alpha2", "s20")
STI_NAMES = ("beta1", "p1", "alpha1") + PHASE2_NAMES

_PROBABILITIES = {"p1", "p2"}

DEFAULT_BOUNDS = {
    "beta1": (1e-8, 10.0), "alpha1": (1e-8, 10.0),
    "beta21": (1e-8, 10.0), "beta22": (1e-8, 10.0), "beta23": (1e-8, 10.0),
    "alpha2": (1e-8, 10.0),
    "p1": (1e-6, 1.0), "p2": (1e-6, 1.0),
    "m21": (1e-4, 10.0), "m22": (1e-4, 10.0), "m23": (1e-4, 10.0),
    "s10": (1e2, 1e8), "s20": (1e2, 1e8),
}

# Objective value for parameter vectors the model rejects or cannot integrate.
PENALTY = 1e30

# Start-point candidates drawn per requested restart.
OVERSAMPLE = 4

DEFAULT_CFG = IntegrationConfig(step=0.01, t_end=1.0)


def _sample(times, values, at):
    return np.interp(at, times, values)


def _horizon(cfg, *t_obs):
    t_max = max((float(np.max(t)) for t in t_obs if len(t)), default=0.0)
    return max(t_max, cfg.step)


# --------------------------------------------------------------------------
# Forward predictions
# --------------------------------------------------------------------------


def phase1_trajectory(params, seed, t_end, cfg=DEFAULT_CFG):
    """RK4 phase-1 trajectory from ``seed`` initial forwarders."""
    y0 = Phase1State.seeded(params.s10, seed).as_array()
    times, states, _ = simulate(Model.PHASE1, y0, params.theta(), cfg.step, t_end, 1, strict=True)
    return Trajectory(times, states, Model.PHASE1)


def predict_phase1(params, data, cfg=DEFAULT_CFG):
    """Model ``C1`` at the observation times of ``data``."""
    traj = phase1_trajectory(params, data.counts[0], _horizon(cfg, data.t), cfg)
    return _sample(traj.times, traj["c1"], data.t)


def predict_lti(params, phase1_traj, tau, data, cfg=DEFAULT_CFG):
    """Model ``C2`` at the observation times of ``data`` (hours since posting)."""
    init = handoff_lti(phase1_traj, tau, params.s20, data.counts[0])
    times, states, _ = simulate(Model.LTI, init.as_array(), params.theta(), cfg.step,
                                _horizon(cfg, data.t), 1, strict=True)
    return _sample(times, states[:, 5], data.t)


def _sti_prediction(p1, p2, tau, data_a, data_b, p1_early, cfg, early_traj=None):
    p1_early = p1 if p1_early is None else p1_early
    seed_a = data_a.counts[0]
    seed_b = data_b.counts[0] if len(data_b) else 0
    t_a = data_a.t
    t_b = data_b.t if len(data_b) else np.empty(0)
    if early_traj is None:
        early_traj = phase1_trajectory(p1_early, seed_a, max(tau, cfg.step), cfg)
    init = handoff_sti(early_traj, tau, seed_b, s_pool=p2.s20)
    horizon = _horizon(cfg, t_a - tau, t_b)
    theta = np.concatenate([p1.theta(), p2.theta()])
    times, states, _ = simulate(Model.STI, init.as_array(), theta, cfg.step, horizon, 1, strict=True)
    pre = t_a <= tau
    c1 = np.empty_like(t_a)
    c1[pre] = _sample(early_traj.times, early_traj["c1"], t_a[pre])
    c1[~pre] = _sample(times, states[:, 6], t_a[~pre] - tau)
    c2 = _sample(times, states[:, 7], t_b)
    return c1, c2


def predict_sti(p1, p2, tau, data_a, data_b, p1_early=None, cfg=DEFAULT_CFG):
    """Model ``(C1, C2)`` at the observation times of both series.

    ``data_a`` times are hours since the old information was posted,
    ``data_b`` times hours since the new one was posted at ``tau``.  The old
    information spreads alone with ``p1_early`` (default ``p1``) up to ``tau``
    and jointly with ``p1``/``p2`` afterwards.
    """
    return _sti_prediction(p1, p2, tau, data_a, data_b, p1_early, cfg)


# --------------------------------------------------------------------------
# Objectives
# --------------------------------------------------------------------------


def _sse(pred, obs):
    r = pred - obs
    return float(r @ r)


def ls_error_phase1(params, data, cfg=DEFAULT_CFG):
    """Sum of squared ``C1`` residuals of the stand-alone model."""
    try:
        return _sse(predict_phase1(params, data, cfg), data.c)
    except IntegrationError as exc:
        raise IntegrationError(f"{exc} (params={params})", exc.time) from exc


def ls_error_lti(params, phase1_traj, tau, data, cfg=DEFAULT_CFG):
    """Sum of squared ``C2`` residuals of the LTI model posted at ``tau``.

    The immune classes handed over from ``phase1_traj`` are fixed inputs, not
    free parameters.
    """
    try:
        return _sse(predict_lti(params, phase1_traj, tau, data, cfg), data.c)
    except IntegrationError as exc:
        raise IntegrationError(f"{exc} (params={params})", exc.time) from exc


def ls_error_sti(p1, p2, tau, data_a, data_b, p1_early=None, cfg=DEFAULT_CFG):
    """Joint squared residuals of both cumulative series under the STI model."""
    try:
        c1, c2 = predict_sti(p1, p2, tau, data_a, data_b, p1_early, cfg)
    except IntegrationError as exc:
        raise IntegrationError(f"{exc} (p1={p1}, p2={p2})", exc.time) from exc
    err = _sse(c1, data_a.c)
    if len(data_b):
        err += _sse(c2, data_b.c)
    return err


# --------------------------------------------------------------------------
# Fitting
# --------------------------------------------------------------------------


@dataclass
class FitSpec:
    """What to fit, to which data, and how hard to try.

    Parameters
    ----------
    model : Model or str
        ``phase1``, ``lti`` or ``sti``.
    datasets : tuple of ForwardingDataset
        One series for ``phase1``/``lti``; ``(old, new)`` for ``sti``.
    baseline : dict
        Values for every parameter of the model; entries not in ``free`` stay
        fixed at these values.
    free : tuple of str
        Parameter names to optimise.  Defaults to all of the model's
        parameters.
    bounds : dict
        Per-parameter ``(lower, upper)`` overrides of :data:`DEFAULT_BOUNDS`.
    restarts : int
        Number of Nelder--Mead starts, drawn by Latin hypercube in the
        transformed box.
    seed : int
        Seed for the start points.
    phase1_traj : Trajectory, optional
        Old-information trajectory (``lti`` only).
    tau : float
        Posting time of the new information on the old one's clock
        (``lti``/``sti``).
    p1_early : Phase1Params, optional
        Stand-alone parameters of the old information before ``tau``
        (``sti`` only; defaults to the joint values).
    start_spread : float
        Start points are drawn within ``start_spread`` decades of the baseline
        (odds decades for probabilities), clipped to the bounds.
    start_from_baseline : bool
        Use the baseline itself as the first start point.
    """

    model: Model
    datasets: tuple
    baseline: dict
    free: tuple = ()
    bounds: dict = field(default_factory=dict)
    restarts: int = 32
    seed: int = 0
    maxfev: int = 2000
    xatol: float = 1e-4
    fatol: float = 1e-9
    polish: int = 1
    phase1_traj: Trajectory | None = None
    tau: float = 0.0
    p1_early: Phase1Params | None = None
    start_spread: float = 1.0
    start_from_baseline: bool = False
    cfg: IntegrationConfig = DEFAULT_CFG

    def __post_init__(self):
        self.model = Model(self.model)
        self.datasets = tuple(self.datasets)
        names = self.parameter_names()
        missing = set(names) - set(self.baseline)
        if missing:
            raise ValidationError(f"baseline lacks {sorted(missing)}")
        if not self.free:
            self.free = names
        self.free = tuple(self.free)
        unknown = set(self.free) - set(names)
        if unknown:
            raise ValidationError(f"unknown free parameters {sorted(unknown)}")
        for name in self.free:
            lo, hi = self.bound(name)
            if not (math.isfinite(lo) and math.isfinite(hi) and 0 < lo <= hi):
                raise ValidationError(f"bad bounds for {name}: {(lo, hi)}")
        if self.restarts < 1:
            raise ValidationError("restarts must be >= 1")
        need = 2 if self.model is Model.STI else 1
        if len(self.datasets) != need:
            raise ValidationError(f"{self.model.value} fit needs {need} dataset(s)")
        if self.model is Model.LTI and self.phase1_traj is None:
            raise ValidationError("LTI fit needs a phase-1 trajectory")

    def parameter_names(self):
        return {Model.PHASE1: PHASE1_NAMES, Model.LTI: PHASE2_NAMES, Model.STI: STI_NAMES}[self.model]

    def bound(self, name):
        return tuple(float(v) for v in self.bounds.get(name, DEFAULT_BOUNDS[name]))


@dataclass
class FitResult:
    """Outcome of :func:`fit`.

    ``params`` is a parameter object (a ``(Phase1Params, Phase2Params)`` pair
    for STI).  ``trace`` holds the final objective of every restart in start
    order; ``error`` is its minimum.
    """

    params: object
    error: float
    trace: list
    residuals: np.ndarray
    converged: bool
    n_evaluations: int
    free: tuple

    def to_dict(self):
        from .io import params_to_mapping

        return {
            "params": params_to_mapping(self.params),
            "ls_error": self.error,
            "restart_errors": list(self.trace),
            "residuals": self.residuals.tolist(),
            "converged": self.converged,
            "n_evaluations": self.n_evaluations,
            "free": list(self.free),
        }


class _Transform:
    """Map unconstrained vectors onto the box, logit-style per coordinate.

    Probabilities are uniform in the box under the sigmoid, everything else is
    uniform in log space.
    """

    def __init__(self, names, bounds):
        self.names = names
        lo = np.array([bounds[n][0] for n in names], dtype=float)
        hi = np.array([bounds[n][1] for n in names], dtype=float)
        self.is_log = np.array([n not in _PROBABILITIES for n in names])
        self.lo = np.where(self.is_log, np.log(lo), lo)
        self.hi = np.where(self.is_log, np.log(hi), hi)

    def to_box(self, u):
        q = 0.5 * (1.0 + np.tanh(0.5 * np.asarray(u)))
        v = self.lo + (self.hi - self.lo) * q
        return np.where(self.is_log, np.exp(v), v)

    def from_box(self, x, eps=1e-9):
        x = np.asarray(x, dtype=float)
        v = np.where(self.is_log, np.log(np.maximum(x, 1e-300)), x)
        span = np.where(self.hi > self.lo, self.hi - self.lo, 1.0)
        q = np.clip((v - self.lo) / span, eps, 1.0 - eps)
        return np.log(q / (1.0 - q))

    def from_unit(self, q, eps=1e-9):
        q = np.clip(q, eps, 1.0 - eps)
        return np.log(q / (1.0 - q))


def _build_params(model, values):
    if model is Model.PHASE1:
        return Phase1Params(**{n: values[n] for n in PHASE1_NAMES})
    if model is Model.LTI:
        return Phase2Params(**{n: values[n] for n in PHASE2_NAMES})
    p1 = Phase1Params(values["beta1"], values["p1"], values["alpha1"], values["s20"])
    return p1, Phase2Params(**{n: values[n] for n in PHASE2_NAMES})


def _objective_factory(spec):
    model = spec.model
    cfg = spec.cfg
    if model is Model.PHASE1:
        (data,) = spec.datasets
        return lambda p: ls_error_phase1(p, data, cfg)
    if model is Model.LTI:
        (data,) = spec.datasets
        return lambda p: ls_error_lti(p, spec.phase1_traj, spec.tau, data, cfg)
    data_a, data_b = spec.datasets
    p1_early = spec.p1_early
    early = None
    if p1_early is not None:
        early = phase1_trajectory(p1_early, data_a.counts[0], max(spec.tau, cfg.step), cfg)

    def objective(pair):
        p1, p2 = pair
        c1, c2 = _sti_prediction(p1, p2, spec.tau, data_a, data_b, p1_early, cfg, early_traj=early)
        err = _sse(c1, data_a.c)
        if len(data_b):
            err += _sse(c2, data_b.c)
        return err

    return objective


def _residuals(spec, params):
    cfg = spec.cfg
    if spec.model is Model.PHASE1:
        (data,) = spec.datasets
        return predict_phase1(params, data, cfg) - data.c
    if spec.model is Model.LTI:
        (data,) = spec.datasets
        return predict_lti(params, spec.phase1_traj, spec.tau, data, cfg) - data.c
    data_a, data_b = spec.datasets
    c1, c2 = predict_sti(*params, spec.tau, data_a, data_b, spec.p1_early, cfg)
    return np.concatenate([c1 - data_a.c, c2 - data_b.c])


def _start_points(spec, tr, rng, n):
    names = spec.free
    base = np.array([spec.baseline[k] for k in names], dtype=float)
    lo = np.array([spec.bound(k)[0] for k in names])
    hi = np.array([spec.bound(k)[1] for k in names])
    base = np.clip(base, lo, hi)
    is_prob = np.array([k in _PROBABILITIES for k in names])
    width = spec.start_spread * np.log(10.0)
    z = (2.0 * lhs_unit(n, len(names), rng) - 1.0) * width
    with np.errstate(divide="ignore"):
        odds = np.log(base / np.maximum(1.0 - base, 1e-300))
        prob = 1.0 / (1.0 + np.exp(-(odds + z)))
    x = np.clip(np.where(is_prob, prob, base * np.exp(z)), lo, hi)
    return [tr.from_box(row) for row in x]


def fit(spec):
    """Multi-start Nelder--Mead least-squares fit.

    Each start is refined by ``spec.polish`` further Nelder--Mead runs from its
    own end point, which rebuilds a collapsed simplex.  The result is
    deterministic for a given ``spec`` (including ``spec.seed``).

    Returns
    -------
    FitResult
        ``converged`` is false when no restart met the tolerances; the best
        values found are still returned.
    """
    names = spec.free
    bounds = {n: spec.bound(n) for n in names}
    # fatol is relative to the data's sum of squares
    scale = sum(float(d.c @ d.c) for d in spec.datasets) or 1.0
    tr = _Transform(names, bounds)
    objective = _objective_factory(spec)
    fixed = dict(spec.baseline)
    n_eval = 0

    def f(u):
        nonlocal n_eval
        n_eval += 1
        values = dict(fixed)
        values.update(zip(names, map(float, tr.to_box(u))))
        try:
            params = _build_params(spec.model, values)
            return objective(params)
        except (DomainError, IntegrationError):
            return PENALTY

    rng = np.random.default_rng(spec.seed)
    # oversample the design and keep feasible candidates first, in draw order
    candidates = _start_points(spec, tr, rng, OVERSAMPLE * spec.restarts)
    scored = [(u, f(u)) for u in candidates]
    feasible = [c for c in scored if c[1] < PENALTY]
    starts = (feasible + [c for c in scored if c[1] >= PENALTY])[: spec.restarts]
    if spec.start_from_baseline:
        u_base = tr.from_box([spec.baseline[k] for k in names])
        starts[0] = (u_base, f(u_base))

    options = {"maxfev": spec.maxfev, "xatol": spec.xatol, "fatol": spec.fatol * scale,
               "adaptive": len(names) > 4}
    best_u, best_f = None, math.inf
    trace = []
    converged = False
    for k, (u0, f0) in enumerate(starts):
        res = minimize(f, u0, method="Nelder-Mead", options=options)
        u, fu, ok = res.x, res.fun, res.success
        for _ in range(spec.polish):
            res = minimize(f, u, method="Nelder-Mead", options=options)
            if res.fun >= fu:
                break
            u, fu, ok = res.x, res.fun, res.success
        if f0 <= fu:
            # never report worse than the start point
            u, fu = u0, f0
        ok = bool(ok) and fu < PENALTY
        converged |= ok
        trace.append(float(fu))
        if fu < best_f:
            best_u, best_f = u, fu
        log.debug("restart %d: error %.6g (converged=%s)", k, fu, ok)

    values = dict(fixed)
    values.update(zip(names, map(float, tr.to_box(best_u))))
    try:
        params = _build_params(spec.model, values)
        residuals = _residuals(spec, params)
    except (DomainError, IntegrationError):
        params, residuals, converged = None, np.full(sum(len(d) for d in spec.datasets), np.nan), False
    return FitResult(params, float(best_f), trace, residuals, converged, n_eval, names)


def baseline_dict(params):
    """Flatten a parameter object (or STI pair) into a ``FitSpec.baseline`` dict."""
    if isinstance(params, tuple):
        p1, p2 = params
        out = {k: v for k, v in p1.to_dict().items() if k != "s10"}
        out.update(p2.to_dict())
        return out
    return dataclasses.asdict(params)
