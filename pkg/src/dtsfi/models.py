"""Parameter and state types and vector fields of the three SFI systems.

Three systems are covered:

* ``PHASE1`` -- a single piece of information spreading alone
  (susceptible ``s1``, forwarding ``f1``, inactive immune ``i1_plus``,
  direct immune ``i1_minus``).
* ``LTI`` -- a new piece posted once the old one has settled; the new piece
  draws forwarders from a fresh susceptible pool ``s2`` and from the two
  immune classes left behind by the old piece.
* ``STI`` -- a new piece posted while the old one is still spreading; both
  share the susceptible pool ``s1``.

Every state carries cumulative forwarding accumulators (``c1``/``c2``) as extra
ODE components, always stored after the compartments.  Time is in hours.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass

import numba
import numpy as np

from .errors import DomainError, OutOfRangeError

__all__ = [
    "Model",
    "Phase1Params",
    "Phase2Params",
    "Phase1State",
    "LtiPhase2State",
    "StiPhase2State",
    "COMPONENTS",
    "N_COMPARTMENTS",
    "rhs_phase1",
    "rhs_lti_phase2",
    "rhs_sti_phase2",
    "handoff_lti",
    "handoff_sti",
    "theta_for",
    "state_type",
]


class Model(str, enum.Enum):
    PHASE1 = "phase1"
    LTI = "lti"
    STI = "sti"


# Component order is shared with the compiled kernels below.
COMPONENTS = {
    Model.PHASE1: ("s1", "f1", "i1_plus", "i1_minus", "c1"),
    Model.LTI: ("s2", "i1_plus", "i1_minus", "f2", "i2", "c2"),
    Model.STI: ("s1", "f1", "i1_plus", "i1_minus", "f2", "i2", "c1", "c2"),
}
N_COMPARTMENTS = {Model.PHASE1: 4, Model.LTI: 5, Model.STI: 6}

_MODEL_CODE = {Model.PHASE1: 0, Model.LTI: 1, Model.STI: 2}


def _check_finite(obj):
    for f in dataclasses.fields(obj):
        v = getattr(obj, f.name)
        if not math.isfinite(v):
            raise DomainError(f"{type(obj).__name__}.{f.name} is not finite: {v!r}")


# --------------------------------------------------------------------------
# Parameters
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Phase1Params:
    """Rates of the stand-alone spread.

    Parameters
    ----------
    beta1 : float
        Contact rate per user and hour.
    p1 : float
        Probability that a contacted susceptible forwards.
    alpha1 : float
        Rate at which forwarders become inactive (per hour).
    s10 : float
        Initial susceptible pool.
    """

    beta1: float
    p1: float
    alpha1: float
    s10: float

    def __post_init__(self):
        _check_finite(self)
        if self.beta1 < 0:
            raise DomainError("beta1 must be >= 0")
        if self.alpha1 <= 0:
            raise DomainError("alpha1 must be > 0")
        if not 0.0 <= self.p1 <= 1.0:
            raise DomainError("p1 must lie in [0, 1]")
        if self.s10 <= 0:
            raise DomainError("s10 must be > 0")

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**{f.name: float(d[f.name]) for f in dataclasses.fields(cls)})

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def theta(self):
        return np.array([self.beta1, self.p1, self.alpha1], dtype=float)


@dataclass(frozen=True)
class Phase2Params:
    """Rates governing the newly posted information.

    ``m21``, ``m22`` and ``m23`` scale the forwarding probability ``p2`` for
    contacts drawn from the inactive-immune, direct-immune and unexposed
    populations respectively.  An index may exceed 1 as long as its product
    with ``p2`` stays a probability.

    For the LTI system ``s20`` is the fresh susceptible pool at posting time.
    For the STI system it is the shared pool at the old information's posting
    time (see :func:`handoff_sti`).
    """

    beta21: float
    beta22: float
    beta23: float
    m21: float
    m22: float
    m23: float
    p2: float
    alpha2: float
    s20: float

    def __post_init__(self):
        _check_finite(self)
        for name in ("beta21", "beta22", "beta23", "m21", "m22", "m23"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be >= 0")
        if self.alpha2 <= 0:
            raise DomainError("alpha2 must be > 0")
        if not 0.0 <= self.p2 <= 1.0:
            raise DomainError("p2 must lie in [0, 1]")
        if self.s20 < 0:
            raise DomainError("s20 must be >= 0")
        for name in ("m21", "m22", "m23"):
            if getattr(self, name) * self.p2 > 1.0:
                raise DomainError(f"{name} * p2 exceeds 1")

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**{f.name: float(d[f.name]) for f in dataclasses.fields(cls)})

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def theta(self):
        return np.array(
            [self.beta21, self.beta22, self.beta23,
             self.m21, self.m22, self.m23, self.p2, self.alpha2],
            dtype=float,
        )

    def forwarding_products(self):
        """Return ``(m21*p2*beta21, m22*p2*beta22, m23*p2*beta23)``."""
        return (self.m21 * self.p2 * self.beta21,
                self.m22 * self.p2 * self.beta22,
                self.m23 * self.p2 * self.beta23)


def theta_for(model, params):
    """Flatten a parameter bundle into the kernel's parameter vector.

    ``params`` is a :class:`Phase1Params` for ``PHASE1``, a
    :class:`Phase2Params` for ``LTI`` and a ``(Phase1Params, Phase2Params)``
    pair for ``STI``.
    """
    model = Model(model)
    if model is Model.PHASE1:
        if not isinstance(params, Phase1Params):
            raise TypeError("phase-1 model needs Phase1Params")
        return params.theta()
    if model is Model.LTI:
        if not isinstance(params, Phase2Params):
            raise TypeError("LTI model needs Phase2Params")
        return params.theta()
    p1, p2 = params
    if not (isinstance(p1, Phase1Params) and isinstance(p2, Phase2Params)):
        raise TypeError("STI model needs (Phase1Params, Phase2Params)")
    return np.concatenate([p1.theta(), p2.theta()])


# --------------------------------------------------------------------------
# States
# --------------------------------------------------------------------------


class _StateMixin:
    model: Model

    def as_array(self):
        return np.array([getattr(self, n) for n in COMPONENTS[self.model]], dtype=float)

    @classmethod
    def from_array(cls, arr):
        arr = np.asarray(arr, dtype=float)
        names = COMPONENTS[cls.model]
        if arr.shape != (len(names),):
            raise ValueError(f"expected {len(names)} components, got shape {arr.shape}")
        return cls(*(float(v) for v in arr))

    def total(self):
        """Sum of the compartments (accumulators excluded)."""
        return float(self.as_array()[: N_COMPARTMENTS[self.model]].sum())

    def check(self):
        _check_finite(self)
        for f in dataclasses.fields(self):
            if getattr(self, f.name) < 0:
                raise DomainError(f"{type(self).__name__}.{f.name} is negative")
        return self


@dataclass(frozen=True)
class Phase1State(_StateMixin):
    s1: float
    f1: float
    i1_plus: float
    i1_minus: float
    c1: float

    model = Model.PHASE1

    @classmethod
    def seeded(cls, s10, seed):
        """Initial state with ``seed`` forwarders, counted in ``c1`` too."""
        return cls(s10, seed, 0.0, 0.0, seed)


@dataclass(frozen=True)
class LtiPhase2State(_StateMixin):
    s2: float
    i1_plus: float
    i1_minus: float
    f2: float
    i2: float
    c2: float

    model = Model.LTI


@dataclass(frozen=True)
class StiPhase2State(_StateMixin):
    s1: float
    f1: float
    i1_plus: float
    i1_minus: float
    f2: float
    i2: float
    c1: float
    c2: float

    model = Model.STI


_STATE_TYPES = {Model.PHASE1: Phase1State, Model.LTI: LtiPhase2State, Model.STI: StiPhase2State}


def state_type(model):
    return _STATE_TYPES[Model(model)]


# --------------------------------------------------------------------------
# Compiled vector fields
# --------------------------------------------------------------------------


@numba.njit(cache=True)
def _rhs_phase1(y, th, out):
    s, f = y[0], y[1]
    beta1, p1, alpha1 = th[0], th[1], th[2]
    contact = beta1 * s * f
    out[0] = -contact
    out[1] = p1 * contact - alpha1 * f
    out[2] = alpha1 * f
    out[3] = (1.0 - p1) * contact
    out[4] = p1 * contact


@numba.njit(cache=True)
def _rhs_lti(y, th, out):
    s2, ip, im, f2 = y[0], y[1], y[2], y[3]
    b21, b22, b23 = th[0], th[1], th[2]
    m21, m22, m23, p2, a2 = th[3], th[4], th[5], th[6], th[7]
    x1 = b21 * ip * f2
    x2 = b22 * im * f2
    x3 = b23 * s2 * f2
    fw1 = m21 * p2 * x1
    fw2 = m22 * p2 * x2
    fw3 = m23 * p2 * x3
    out[0] = -x3
    out[1] = -x1
    out[2] = -x2
    out[3] = fw1 + fw2 + fw3 - a2 * f2
    out[4] = (x1 - fw1) + (x2 - fw2) + (x3 - fw3) + a2 * f2
    out[5] = fw1 + fw2 + fw3


@numba.njit(cache=True)
def _rhs_sti(y, th, out):
    s, f1, ip, im, f2 = y[0], y[1], y[2], y[3], y[4]
    beta1, p1, alpha1 = th[0], th[1], th[2]
    b21, b22, b23 = th[3], th[4], th[5]
    m21, m22, m23, p2, a2 = th[6], th[7], th[8], th[9], th[10]
    contact1 = beta1 * s * f1
    x0 = b21 * f1 * f2
    x1 = b21 * ip * f2
    x2 = b22 * im * f2
    x3 = b23 * s * f2
    fw0 = m21 * p2 * x0
    fw1 = m21 * p2 * x1
    fw2 = m22 * p2 * x2
    fw3 = m23 * p2 * x3
    out[0] = -contact1 - x3
    # every contacted old-information forwarder leaves F1, adopter or not
    out[1] = p1 * contact1 - x0 - alpha1 * f1
    out[2] = -x1 + alpha1 * f1
    out[3] = (1.0 - p1) * contact1 - x2
    out[4] = fw0 + fw1 + fw2 + fw3 - a2 * f2
    out[5] = (x0 - fw0) + (x1 - fw1) + (x2 - fw2) + (x3 - fw3) + a2 * f2
    out[6] = p1 * contact1
    out[7] = fw0 + fw1 + fw2 + fw3


@numba.njit(cache=True)
def rhs_kernel(code, y, th, out):
    """Dispatch on the integer model code (0 phase 1, 1 LTI, 2 STI)."""
    if code == 0:
        _rhs_phase1(y, th, out)
    elif code == 1:
        _rhs_lti(y, th, out)
    else:
        _rhs_sti(y, th, out)


def model_code(model):
    return _MODEL_CODE[Model(model)]


def _evaluate(model, state, theta):
    state.check()
    y = state.as_array()
    out = np.empty_like(y)
    rhs_kernel(_MODEL_CODE[model], y, theta, out)
    return state_type(model).from_array(out)


def rhs_phase1(state, params):
    """Time derivative of a :class:`Phase1State`.

    The returned object has the state's fields but holds rates of change.
    """
    return _evaluate(Model.PHASE1, state, theta_for(Model.PHASE1, params))


def rhs_lti_phase2(state, params):
    """Time derivative of an :class:`LtiPhase2State`."""
    return _evaluate(Model.LTI, state, theta_for(Model.LTI, params))


def rhs_sti_phase2(state, p1, p2):
    """Time derivative of a :class:`StiPhase2State`.

    ``p1`` drives the old information, ``p2`` the new one.
    """
    return _evaluate(Model.STI, state, theta_for(Model.STI, (p1, p2)))


# --------------------------------------------------------------------------
# Phase hand-off
# --------------------------------------------------------------------------


def _state_at(traj, tau):
    if traj.model is not Model.PHASE1:
        raise TypeError("hand-off needs a phase-1 trajectory")
    t0, t1 = traj.times[0], traj.times[-1]
    if not (t0 <= tau <= t1):
        raise OutOfRangeError(f"tau={tau} outside trajectory range [{t0}, {t1}]")
    return traj.at(tau)


def handoff_lti(traj, tau, s20, seed_f2):
    """Initial LTI phase-2 state for a post at ``tau`` hours.

    The two immune classes of the old information are read from ``traj``
    (linear interpolation between nodes); the new information starts with
    ``seed_f2`` forwarders drawn from a fresh pool of ``s20`` users.
    """
    st = _state_at(traj, tau)
    return LtiPhase2State(float(s20), st.i1_plus, st.i1_minus, float(seed_f2), 0.0, float(seed_f2))


def handoff_sti(traj, tau, seed_f2, s_pool=None):
    """Joint STI state for a post at ``tau`` hours into the old spread.

    Without ``s_pool`` the shared susceptible pool is ``S1(tau)`` taken from
    ``traj``.  With ``s_pool`` the pool is rescaled to ``s_pool`` users at the
    old information's posting time, minus everyone the old information has
    already reached by ``tau``.
    """
    if seed_f2 < 0:
        raise DomainError("seed_f2 must be >= 0")
    st = _state_at(traj, tau)
    s = st.s1
    if s_pool is not None:
        reached = traj.states[0, 0] - st.s1
        s = float(s_pool) - reached
        if s < 0:
            raise DomainError("susceptible pool smaller than users already reached")
    return StiPhase2State(s, st.f1, st.i1_plus, st.i1_minus, float(seed_f2), 0.0, st.c1, float(seed_f2))
