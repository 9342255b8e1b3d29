"""Latin hypercube sampling and partial rank correlation coefficients."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import CoarseStepWarning, DomainError, InsufficientDataError, IntegrationError, ValidationError
from .indices import DEFAULT_THRESHOLD_FRACTION, extract_indices, r0_for_state
from .integrator import IntegrationConfig, integrate
from .models import Model, Phase2Params, handoff_lti, handoff_sti


def lhs_unit(n, d, rng):
    """``n`` Latin hypercube points in ``[0, 1)^d``.

    Each column holds exactly one point per stratum ``[k/n, (k+1)/n)``, uniform
    within the stratum; strata are shuffled independently per column.
    """
    u = rng.random((n, d))
    strata = np.column_stack([rng.permutation(n) for _ in range(d)]) if d else np.empty((n, 0))
    return (strata + u) / n


PARAMETERS = ("beta21", "beta22", "beta23", "p2", "alpha2", "m21", "m22", "m23", "s20")
INDICES = ("r0", "f2max", "c2_final", "t2b", "t2i", "t2max", "v2o", "v2d")

# runs drifting more than this (relative) after clamping are counted in n_clamped
CLAMP_REPORT = 1e-6
# abort a sensitivity run when more than this share of samples fails
MAX_FAILURE_SHARE = 0.2


@dataclass(frozen=True)
class SamplingPlan:
    """Per-parameter ``(min, max)`` ranges, sample count and seed."""

    ranges: dict
    n: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.n < 100:
            raise ValidationError("sample count must be >= 100")
        for name, (lo, hi) in self.ranges.items():
            if not lo < hi:
                raise ValidationError(f"range for {name} is empty: {(lo, hi)}")

    @classmethod
    def around(cls, baseline, spread=0.5, n=1000, seed=0, names=PARAMETERS):
        """Ranges ``[(1 - spread) x, (1 + spread) x]`` around ``baseline``.

        Probabilities are clipped at 1.
        """
        d = baseline.to_dict() if hasattr(baseline, "to_dict") else dict(baseline)
        ranges = {}
        for k in names:
            lo, hi = (1.0 - spread) * d[k], (1.0 + spread) * d[k]
            if k in ("p1", "p2"):
                hi = min(hi, 1.0)
            ranges[k] = (lo, hi)
        return cls(ranges, n, seed)


def lhs_sample(plan):
    """Latin hypercube design for ``plan``: an ``(n, d)`` array.

    Columns follow the insertion order of ``plan.ranges``; each is uniform
    over its range with exactly one point per ``1/n`` stratum.
    """
    rng = np.random.default_rng(plan.seed)
    lo = np.array([r[0] for r in plan.ranges.values()], dtype=float)
    hi = np.array([r[1] for r in plan.ranges.values()], dtype=float)
    return lo + (hi - lo) * lhs_unit(plan.n, len(lo), rng)


def prcc(samples, outputs):
    """Partial rank correlation of each sample column with ``outputs``.

    Rows whose output is NaN are dropped.  Columns and outputs are
    rank-transformed (average ranks on ties); for each column, the ranks of
    the column and of the output are regressed on the ranks of all other
    columns and the residuals correlated.  A column whose residual has no
    variance gets NaN.

    Raises
    ------
    InsufficientDataError
        With fewer than ``k + 2`` defined outputs for ``k`` columns.
    """
    x = np.asarray(samples, dtype=float)
    y = np.asarray(outputs, dtype=float)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValidationError("samples and outputs must have matching rows")
    keep = np.isfinite(y)
    n, k = int(keep.sum()), x.shape[1]
    if n < k + 2:
        raise InsufficientDataError(f"{n} defined outputs for {k} parameters")
    rx = np.column_stack([rankdata(col) for col in x[keep].T])
    ry = rankdata(y[keep])
    out = np.full(k, np.nan)
    ones = np.ones((n, 1))
    for j in range(k):
        z = np.hstack([ones, np.delete(rx, j, axis=1)])
        res_x = rx[:, j] - z @ np.linalg.lstsq(z, rx[:, j], rcond=None)[0]
        res_y = ry - z @ np.linalg.lstsq(z, ry, rcond=None)[0]
        sx, sy = np.sqrt(res_x @ res_x), np.sqrt(res_y @ res_y)
        # residual spread at round-off level means no usable variation
        if sx <= 1e-9 * n or sy <= 1e-9 * n:
            continue
        out[j] = np.clip(res_x @ res_y / (sx * sy), -1.0, 1.0)
    return out


@dataclass
class SensitivityScenario:
    """Fixed context of a phase-2 sensitivity run.

    ``model`` is ``"lti"`` or ``"sti"``; ``phase1_traj`` is the old
    information's stand-alone trajectory and ``tau`` the posting time.
    ``p1`` gives the old information's joint-phase parameters (STI only).
    """

    model: Model
    phase1_traj: object
    tau: float
    seed_f2: float
    p1: object = None
    horizon: float = 48.0
    # perturbed samples can reach very large outbreaks; 0.01 h is too coarse there
    step: float = 1e-3
    threshold_fraction: float = DEFAULT_THRESHOLD_FRACTION

    def __post_init__(self):
        self.model = Model(self.model)
        if self.model is Model.PHASE1:
            raise ValidationError("sensitivity runs need a phase-2 model")
        if self.model is Model.STI and self.p1 is None:
            raise ValidationError("STI scenario needs joint-phase Phase1Params")


@dataclass
class PrccTable:
    """PRCC of every sampled parameter (rows) against every index (columns)."""

    values: np.ndarray
    n_used: np.ndarray
    parameters: tuple
    indices: tuple
    samples: np.ndarray
    outputs: np.ndarray
    n_failed: int = 0
    n_clamped: int = 0

    def get(self, parameter, index):
        return float(self.values[self.parameters.index(parameter), self.indices.index(index)])

    def column(self, index):
        j = self.indices.index(index)
        return dict(zip(self.parameters, self.values[:, j]))

    def scatter(self, index):
        """Rank pairs ``(parameter rank, index rank)`` per parameter."""
        y = self.outputs[:, self.indices.index(index)]
        keep = np.isfinite(y)
        ry = rankdata(y[keep])
        return {p: np.column_stack([rankdata(self.samples[keep, i]), ry])
                for i, p in enumerate(self.parameters)}

    def to_csv(self):
        lines = ["parameter," + ",".join(self.indices)]
        for i, p in enumerate(self.parameters):
            cells = ["" if not np.isfinite(v) else repr(float(v)) for v in self.values[i]]
            lines.append(p + "," + ",".join(cells))
        lines.append("n_used," + ",".join(str(int(v)) for v in self.n_used))
        return "\n".join(lines) + "\n"

    def scatter_csv(self, index):
        pairs = self.scatter(index)
        header = ",".join(f"{p}_rank,{index}_rank" for p in self.parameters)
        rows = [header]
        n = next(iter(pairs.values())).shape[0] if pairs else 0
        for r in range(n):
            rows.append(",".join(f"{pairs[p][r, 0]!r},{pairs[p][r, 1]!r}" for p in self.parameters))
        return "\n".join(rows) + "\n"


def _run_sample(scenario, p2):
    if scenario.model is Model.LTI:
        init = handoff_lti(scenario.phase1_traj, scenario.tau, p2.s20, scenario.seed_f2)
        params = p2
    else:
        init = handoff_sti(scenario.phase1_traj, scenario.tau, scenario.seed_f2, s_pool=p2.s20)
        params = (scenario.p1, p2)
    cfg = IntegrationConfig(scenario.step, scenario.horizon, 1)
    with warnings.catch_warnings():
        # counted per sample instead
        warnings.simplefilter("ignore", CoarseStepWarning)
        traj = integrate(scenario.model, init, params, cfg)
    heavy = traj.diagnostics["conservation_drift"] > CLAMP_REPORT
    f2max = float(np.max(traj["f2"]))
    rep = extract_indices(traj, scenario.threshold_fraction * f2max if f2max > 0 else None,
                          r0=r0_for_state(init, p2))
    return [np.nan if getattr(rep, k) is None else getattr(rep, k) for k in INDICES], heavy


def run_sensitivity(baseline, plan, scenario):
    """LHS + PRCC of the phase-2 indices around ``baseline``.

    Parameters absent from ``plan.ranges`` stay at their baseline value.

    Raises
    ------
    IntegrationError
        When more than 20% of the samples are invalid or fail to integrate.
    InsufficientDataError
        When the design has no spread (every PRCC would be undefined).
    """
    names = tuple(plan.ranges)
    samples = lhs_sample(plan)
    base = baseline.to_dict()
    outputs = np.full((plan.n, len(INDICES)), np.nan)
    failures = []
    n_clamped = 0
    for r, row in enumerate(samples):
        values = dict(base)
        values.update(zip(names, map(float, row)))
        try:
            outputs[r], heavy = _run_sample(scenario, Phase2Params(**values))
            n_clamped += heavy
        except (DomainError, IntegrationError) as exc:
            failures.append((r, str(exc)))
    if n_clamped:
        warnings.warn(f"{n_clamped} of {plan.n} samples were under-resolved at step "
                      f"{scenario.step:g} h", CoarseStepWarning, stacklevel=2)
    if len(failures) > MAX_FAILURE_SHARE * plan.n:
        raise IntegrationError(
            f"{len(failures)} of {plan.n} samples failed; first: {failures[0][1]}"
        )
    span = samples.max(axis=0) - samples.min(axis=0)
    scale = np.maximum(np.abs(samples).max(axis=0), 1e-300)
    if np.all(span <= 1e-9 * scale):
        raise InsufficientDataError("insufficient variance: every sampled range is degenerate")

    values = np.full((len(names), len(INDICES)), np.nan)
    n_used = np.zeros(len(INDICES), dtype=int)
    for j in range(len(INDICES)):
        y = outputs[:, j]
        n_used[j] = int(np.isfinite(y).sum())
        try:
            values[:, j] = prcc(samples, y)
        except InsufficientDataError:
            pass
    return PrccTable(values, n_used, names, INDICES, samples, outputs, len(failures), n_clamped)
