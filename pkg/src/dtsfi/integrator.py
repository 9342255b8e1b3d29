"""Fixed-step integration of the SFI systems.

:func:`integrate` is classical fourth-order Runge--Kutta; :func:`integrate_oracle`
is forward Euler and exists to cross-check it.  Both step the compiled vector
fields from :mod:`dtsfi.models`.
"""

from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import CoarseStepWarning, DomainError, IntegrationError, ValidationError
from .models import (
    COMPONENTS,
    N_COMPARTMENTS,
    Model,
    model_code,
    rhs_kernel,
    state_type,
    theta_for,
)

__all__ = ["IntegrationConfig", "Trajectory", "integrate", "integrate_oracle", "simulate"]

# In strict mode, undershoot below -CLAMP_TOL * total is an error rather than clamped.
CLAMP_TOL = 1e-9
# relative conservation drift above which a run is flagged as under-resolved
DRIFT_WARN = 1e-6

_OK, _NONFINITE, _NEGATIVE = 0, 1, 2


@dataclass(frozen=True)
class IntegrationConfig:
    step: float = 0.01
    t_end: float = 26.0
    record_every: int = 1

    def __post_init__(self):
        if not (self.step > 0 and math.isfinite(self.step)):
            raise DomainError("step must be > 0")
        if not (self.t_end > 0 and math.isfinite(self.t_end)):
            raise DomainError("t_end must be > 0")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise DomainError("record_every must be a positive integer")


@dataclass
class Trajectory:
    """Time grid with one state row per node.

    ``states`` has one column per entry of ``COMPONENTS[model]``.  Columns can be
    pulled out by name: ``traj["f2"]``.
    """

    times: np.ndarray
    states: np.ndarray
    model: Model
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.model = Model(self.model)
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim != 2 or self.states.shape != (len(self.times), len(COMPONENTS[self.model])):
            raise ValueError("states shape does not match times and model components")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")

    @property
    def components(self):
        return COMPONENTS[self.model]

    def __getitem__(self, name):
        return self.states[:, self.components.index(name)]

    def __len__(self):
        return len(self.times)

    def state(self, i):
        return state_type(self.model).from_array(self.states[i])

    def at(self, t):
        """State at time ``t``, linearly interpolated between nodes."""
        if len(self.times) == 1:
            return self.state(0)
        row = np.array([np.interp(t, self.times, col) for col in self.states.T])
        return state_type(self.model).from_array(row)

    def totals(self):
        """Compartment sum at every node."""
        return self.states[:, : N_COMPARTMENTS[self.model]].sum(axis=1)

    def conservation_drift(self):
        tot = self.totals()
        if tot[0] == 0:
            return float(abs(tot[-1]))
        return float(abs(tot[-1] - tot[0]) / abs(tot[0]))

    def to_csv(self):
        """CSV text with a ``t`` column followed by one column per component."""
        buf = io.StringIO()
        buf.write(",".join(("t",) + self.components) + "\n")
        for t, row in zip(self.times, self.states):
            buf.write(",".join(repr(float(v)) for v in (t, *row)) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        """Inverse of :meth:`to_csv`; the model is recognised from the header."""
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValidationError("empty trajectory file")
        header = tuple(c.strip() for c in lines[0].split(","))
        if header[0] != "t":
            raise ValidationError("first trajectory column must be 't'")
        model = next((m for m, comps in COMPONENTS.items() if comps == header[1:]), None)
        if model is None:
            raise ValidationError(f"columns {header[1:]} match no model")
        try:
            data = np.array([[float(c) for c in ln.split(",")] for ln in lines[1:]], dtype=float)
        except ValueError as exc:
            raise ValidationError(f"bad trajectory value: {exc}") from None
        if data.ndim != 2 or data.shape[0] == 0 or data.shape[1] != len(header):
            raise ValidationError("trajectory rows do not match the header")
        try:
            return cls(data[:, 0], data[:, 1:], model)
        except ValueError as exc:
            raise ValidationError(str(exc)) from None


# --------------------------------------------------------------------------
# Kernels
# --------------------------------------------------------------------------


@numba.njit(cache=True)
def _post_step(y, ncomp, floor):
    """Clamp negative undershoot down to ``floor``.  Returns (status, clamped amount)."""
    clamped = 0.0
    for j in range(y.shape[0]):
        v = y[j]
        if not np.isfinite(v):
            return _NONFINITE, clamped
        if v < 0.0:
            if j < ncomp and v >= floor:
                clamped -= v
                y[j] = 0.0
            elif j >= ncomp and v >= floor:
                y[j] = 0.0
            else:
                return _NEGATIVE, clamped
    return _OK, clamped


@numba.njit(cache=True)
def _run(code, method, y0, th, step, n_steps, t_end, record_every, ncomp, floor_tol):
    n_rec = n_steps // record_every + 1
    if n_steps % record_every != 0:
        n_rec += 1
    times = np.empty(n_rec)
    out = np.empty((n_rec, y0.shape[0]))
    y = y0.copy()
    total = 0.0
    for j in range(ncomp):
        total += y[j]
    floor = -floor_tol * max(total, 1.0)
    k1 = np.empty_like(y)
    k2 = np.empty_like(y)
    k3 = np.empty_like(y)
    k4 = np.empty_like(y)
    tmp = np.empty_like(y)
    times[0] = 0.0
    out[0] = y
    r = 1
    clamp_total = 0.0
    t = 0.0
    for i in range(1, n_steps + 1):
        h = step if i < n_steps else t_end - (n_steps - 1) * step
        rhs_kernel(code, y, th, k1)
        if method == 0:
            for j in range(y.shape[0]):
                tmp[j] = y[j] + 0.5 * h * k1[j]
            rhs_kernel(code, tmp, th, k2)
            for j in range(y.shape[0]):
                tmp[j] = y[j] + 0.5 * h * k2[j]
            rhs_kernel(code, tmp, th, k3)
            for j in range(y.shape[0]):
                tmp[j] = y[j] + h * k3[j]
            rhs_kernel(code, tmp, th, k4)
            for j in range(y.shape[0]):
                y[j] += h * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) / 6.0
        else:
            for j in range(y.shape[0]):
                y[j] += h * k1[j]
        t = t_end if i == n_steps else i * step
        status, c = _post_step(y, ncomp, floor)
        clamp_total += c
        if status != _OK:
            return times[:r], out[:r], clamp_total, status, t
        if i % record_every == 0 or i == n_steps:
            times[r] = t
            out[r] = y
            r += 1
    return times[:r], out[:r], clamp_total, _OK, t


# --------------------------------------------------------------------------
# Public API
# --------------------------------------------------------------------------


def _initial_array(model, initial):
    if hasattr(initial, "as_array"):
        if Model(initial.model) is not model:
            raise TypeError(f"initial state is for {initial.model.value}, not {model.value}")
        initial.check()
        return initial.as_array()
    y0 = np.asarray(initial, dtype=float)
    if y0.shape != (len(COMPONENTS[model]),):
        raise ValueError("initial state has the wrong number of components")
    if not np.all(np.isfinite(y0)) or np.any(y0 < 0):
        raise DomainError("initial state must be finite and nonnegative")
    return y0


def simulate(model, y0, theta, step, t_end, record_every=1, method=0, strict=False):
    """Array-level integration without dataclass validation.

    Returns ``(times, states, clamped)``.  Used by the objective functions in
    tight loops; raises :class:`IntegrationError` on failure.  With ``strict``
    an undershoot larger than round-off is a failure instead of being clamped.
    """
    model = Model(model)
    n_steps = max(1, int(math.ceil(t_end / step - 1e-9)))
    times, states, clamped, status, t_fail = _run(
        model_code(model), method, np.asarray(y0, dtype=float), np.asarray(theta, dtype=float),
        float(step), n_steps, float(t_end), int(record_every), N_COMPARTMENTS[model],
        CLAMP_TOL if strict else np.inf,
    )
    if status == _NONFINITE:
        raise IntegrationError(f"non-finite state at t={t_fail:.6g} h", t_fail)
    if status == _NEGATIVE:
        raise IntegrationError(f"compartment driven negative at t={t_fail:.6g} h", t_fail)
    return times, states, clamped


def _integrate(model, initial, params, cfg, method):
    model = Model(model)
    y0 = _initial_array(model, initial)
    theta = theta_for(model, params)
    times, states, clamped = simulate(model, y0, theta, cfg.step, cfg.t_end, cfg.record_every, method)
    traj = Trajectory(times, states, model)
    traj.diagnostics = {
        "method": "rk4" if method == 0 else "euler",
        "step": cfg.step,
        "clamped": clamped,
        "conservation_drift": traj.conservation_drift(),
    }
    if traj.diagnostics["conservation_drift"] > DRIFT_WARN:
        warnings.warn(
            f"{model.value} run at step {cfg.step:g} h drifted by "
            f"{traj.diagnostics['conservation_drift']:.3g} (relative) after clamping; "
            "results are unreliable, reduce the step",
            CoarseStepWarning,
            stacklevel=3,
        )
    return traj


def integrate(model, initial, params, cfg=IntegrationConfig()):
    """Integrate ``model`` from ``initial`` over ``[0, cfg.t_end]`` with RK4.

    Parameters
    ----------
    model : Model or str
        ``"phase1"``, ``"lti"`` or ``"sti"``.
    initial : state dataclass or array
        Starting state matching ``model``.
    params : Phase1Params, Phase2Params or (Phase1Params, Phase2Params)
        Parameter bundle for ``model`` (the pair is for STI).
    cfg : IntegrationConfig
        Step, horizon and output decimation.

    Returns
    -------
    Trajectory
        ``diagnostics["clamped"]`` holds the total mass clamped back to zero.

    Raises
    ------
    IntegrationError
        If the state becomes non-finite; the message names the failure time.

    Notes
    -----
    Compartments pushed below zero by a step are reset to zero.  When that
    breaks conservation by more than 1e-6 relative a
    :class:`~dtsfi.errors.CoarseStepWarning` is issued: the step is too
    coarse for the parameters.
    """
    return _integrate(model, initial, params, cfg, 0)


def integrate_oracle(model, initial, params, cfg):
    """Forward-Euler counterpart of :func:`integrate` for cross-validation.

    First order only, so pass a small ``cfg.step``.
    """
    return _integrate(model, initial, params, cfg, 1)
