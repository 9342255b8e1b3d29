"""Reproduction ratios and propagation indices of the new information."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DomainError
from .models import LtiPhase2State, Model, StiPhase2State, rhs_lti_phase2, rhs_sti_phase2

__all__ = [
    "IndexReport",
    "r0_lti",
    "r0_sti",
    "r0_for_state",
    "extract_indices",
    "check_threshold",
    "initial_growth",
    "DEFAULT_THRESHOLD_FRACTION",
]

DEFAULT_THRESHOLD_FRACTION = 0.05
INDETERMINATE_BAND = 1e-9
# |C2(t_end) - C2(0.9 t_end)| must stay below this fraction of C2(t_end)
FINAL_SIZE_TOL = 1e-3


def _nonneg(**values):
    for k, v in values.items():
        if not v >= 0:
            raise DomainError(f"{k} must be >= 0, got {v!r}")


def r0_lti(p, i1_plus_tau, i1_minus_tau):
    """Reproduction ratio of information posted after the old one settled.

    Expected forwards generated by one forwarder during its active period,
    given the immune classes left at posting time and a fresh pool ``p.s20``.
    """
    _nonneg(i1_plus_tau=i1_plus_tau, i1_minus_tau=i1_minus_tau)
    if p.alpha2 == 0:
        raise DomainError("alpha2 must be nonzero")
    k1, k2, k3 = p.forwarding_products()
    return (k1 * i1_plus_tau + k2 * i1_minus_tau + k3 * p.s20) / p.alpha2


def r0_sti(p, f1_tau, i1_plus_tau, i1_minus_tau, s1_tau):
    """Reproduction ratio of information posted while the old one spreads.

    Active and inactive forwarders of the old information share the same
    contact coefficient.
    """
    _nonneg(f1_tau=f1_tau, i1_plus_tau=i1_plus_tau, i1_minus_tau=i1_minus_tau, s1_tau=s1_tau)
    if p.alpha2 == 0:
        raise DomainError("alpha2 must be nonzero")
    k1, k2, k3 = p.forwarding_products()
    return (k1 * f1_tau + k1 * i1_plus_tau + k2 * i1_minus_tau + k3 * s1_tau) / p.alpha2


def r0_for_state(state, p2):
    """Reproduction ratio at a phase-2 initial state (LTI or STI)."""
    if isinstance(state, LtiPhase2State):
        # the fresh pool is the state's own s2
        return r0_lti(p2.replace(s20=state.s2), state.i1_plus, state.i1_minus)
    if isinstance(state, StiPhase2State):
        return r0_sti(p2, state.f1, state.i1_plus, state.i1_minus, state.s1)
    raise TypeError("expected an LTI or STI phase-2 state")


def initial_growth(state, p2, p1=None):
    """``dF2/dt`` at ``state``, from the vector field itself."""
    if isinstance(state, LtiPhase2State):
        return rhs_lti_phase2(state, p2).f2
    if p1 is None:
        raise ValueError("STI states need the old information's parameters")
    return rhs_sti_phase2(state, p1, p2).f2


@dataclass(frozen=True)
class IndexReport:
    """Summary indices of one phase-2 run.

    Times are hours since the new information was posted.  Indices that do
    not exist for a run (no threshold crossing, degenerate peak) are ``None``.
    """

    r0: float | None
    f2max: float
    t2max: float | None
    c2_final: float
    t2b: float | None
    t2e: float | None
    t2i: float | None
    v2o: float | None
    v2d: float | None
    threshold_f2star: float | None
    final_size_converged: bool = True

    def to_dict(self):
        return asdict(self)


def _crossing(t0, t1, f0, f1, level):
    if f1 == f0:
        return t0
    return t0 + (level - f0) / (f1 - f0) * (t1 - t0)


def extract_indices(traj, f2star=None, r0=None):
    """Propagation indices from a trajectory with ``f2``/``c2`` columns.

    Parameters
    ----------
    traj : Trajectory
        LTI or STI phase-2 trajectory, time measured from posting.
    f2star : float, optional
        Outbreak threshold.  Defaults to 5% of the run's own peak.
    r0 : float, optional
        Reproduction ratio to carry in the report.

    Notes
    -----
    ``t2b`` is the first upward crossing of ``f2star`` (0 if the run starts at
    or above it) and ``t2e`` the last downward crossing, both linearly
    interpolated between grid nodes.  The peak time is the earliest argmax.
    A run with no forwarders at all has no threshold and no time indices.
    """
    if traj.model not in (Model.LTI, Model.STI):
        raise TypeError("trajectory has no F2 component")
    t = traj.times
    f2 = traj["f2"]
    c2 = traj["c2"]
    i_max = int(np.argmax(f2))
    f2max = float(f2[i_max])
    t2max = float(t[i_max]) if f2max > 0 else None
    if f2star is None:
        f2star = DEFAULT_THRESHOLD_FRACTION * f2max
        if f2max == 0:
            f2star = math.inf
    if not f2star > 0:
        raise DomainError("f2star must be > 0")

    c_end = float(c2[-1])
    c_before = float(np.interp(0.9 * t[-1], t, c2))
    converged = abs(c_end - c_before) <= FINAL_SIZE_TOL * max(abs(c_end), 1e-300)

    t2b = t2e = t2i = v2o = v2d = None
    above = f2 >= f2star
    if f2max > 0 and above.any():
        if above[0]:
            t2b = float(t[0])
        else:
            i = int(np.argmax(above))
            t2b = float(_crossing(t[i - 1], t[i], f2[i - 1], f2[i], f2star))
        down = np.flatnonzero(above[:-1] & ~above[1:])
        if down.size:
            j = int(down[-1]) + 1
            t2e = float(_crossing(t[j - 1], t[j], f2[j - 1], f2[j], f2star))
            t2i = t2e - t2b
        rise = f2max - f2star
        if t2max > t2b:
            v2o = rise / (t2max - t2b)
        if t2e is not None and t2e > t2max:
            v2d = rise / (t2e - t2max)

    return IndexReport(
        r0=None if r0 is None else float(r0),
        f2max=f2max,
        t2max=t2max,
        c2_final=c_end,
        t2b=t2b,
        t2e=t2e,
        t2i=t2i,
        v2o=v2o,
        v2d=v2d,
        threshold_f2star=float(f2star) if math.isfinite(f2star) else None,
        final_size_converged=bool(converged),
    )


def check_threshold(r0, traj, p2=None, p1=None):
    """Whether the initial direction of ``F2`` agrees with ``r0`` vs 1.

    With ``p2`` (and ``p1`` for STI) the initial derivative comes from the
    vector field; otherwise from the first grid step of ``traj``.  Returns
    ``None`` when ``r0`` is within 1e-9 of 1, where the sign is indeterminate.
    """
    if abs(r0 - 1.0) < INDETERMINATE_BAND:
        return None
    if p2 is not None:
        slope = initial_growth(traj.state(0), p2, p1)
    else:
        f2 = traj["f2"]
        slope = f2[1] - f2[0] if len(f2) > 1 else 0.0
    return bool((slope > 0) == (r0 > 1.0))
