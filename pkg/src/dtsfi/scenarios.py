"""Posting-delay scans: how the new information fares for different posting times."""

from __future__ import annotations

import csv
import enum
import io as _io
import logging
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, IntegrationError
from .indices import DEFAULT_THRESHOLD_FRACTION, extract_indices, r0_for_state
from .integrator import IntegrationConfig, Trajectory, integrate
from .models import Model, Phase1State, handoff_lti, handoff_sti

__all__ = ["Phase", "DelayScan", "classify_phase", "delay_scan", "SCAN_COLUMNS"]

log = logging.getLogger(__name__)

SCAN_COLUMNS = ("tau", "phase", "r0", "f2max", "t2max", "c2_final", "t2b", "t2e", "t2i", "v2o", "v2d")

# relative distance to f1star below which a classification is logged as borderline
BOUNDARY_BAND = 0.05


class Phase(str, enum.Enum):
    OUTBREAK = "outbreak"
    QUASI_STEADY = "quasi_steady"


def classify_phase(traj, tau, f1star=None):
    """``OUTBREAK`` if ``F1(tau) >= f1star``, else ``QUASI_STEADY``.

    ``f1star`` defaults to 5% of the trajectory's peak ``F1``.
    """
    if f1star is None:
        f1star = DEFAULT_THRESHOLD_FRACTION * float(np.max(traj["f1"]))
    f1 = traj.at(tau).f1
    if f1star > 0 and abs(f1 - f1star) < BOUNDARY_BAND * f1star:
        log.info("tau=%g h is within %.0f%% of the phase boundary", tau, 100 * BOUNDARY_BAND)
    return Phase.OUTBREAK if f1 >= f1star else Phase.QUASI_STEADY


@dataclass
class DelayScan:
    """Index reports of one scan, in increasing ``tau`` order."""

    taus: tuple
    phases: tuple
    reports: tuple
    trajectories: tuple = ()

    def column(self, name):
        return np.array([np.nan if getattr(r, name) is None else getattr(r, name) for r in self.reports])

    def rows(self):
        for tau, ph, rep in zip(self.taus, self.phases, self.reports):
            d = rep.to_dict()
            yield {"tau": tau, "phase": ph.value, **{k: d[k] for k in SCAN_COLUMNS[2:]}}

    def to_csv(self):
        buf = _io.StringIO()
        w = csv.DictWriter(buf, fieldnames=SCAN_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in self.rows():
            w.writerow({k: "" if v is None else v for k, v in row.items()})
        return buf.getvalue()


def delay_scan(p1, p2, taus, seed_f2, *, seed_f1, p1_joint=None, horizon=48.0,
               phase1_horizon=None, cfg=IntegrationConfig(1e-3, 48.0), f1star=None, f2star=None,
               force=None):
    """Post the new information at each ``tau`` and collect its indices.

    Parameters
    ----------
    p1 : Phase1Params
        Stand-alone parameters of the old information (``seed_f1`` initial
        forwarders).
    p2 : Phase2Params
        New-information parameters, held fixed across the scan.  ``s20`` is
        the fresh pool for LTI runs and the shared pool at the old posting
        time for STI runs.
    taus : sequence of float
        Posting times in hours after the old information, strictly increasing.
    seed_f2 : float
        Initial forwarders of the new information.
    p1_joint : Phase1Params, optional
        Old-information parameters during joint (STI) spread; defaults to ``p1``.
    horizon : float
        Hours simulated after each posting.
    cfg : IntegrationConfig
        Step and output decimation (``t_end`` is replaced by ``horizon``).
        Large outbreaks are stiff; watch for
        :class:`~dtsfi.errors.CoarseStepWarning`.
    force : Phase, optional
        Skip classification and run this model for every ``tau``.

    Each ``tau`` is classified on the old information's stand-alone
    trajectory; outbreak posts run the STI system, quasi-steady ones the LTI
    system.
    """
    taus = tuple(float(t) for t in taus)
    if not taus or any(b <= a for a, b in zip(taus, taus[1:])):
        raise DomainError("taus must be a nonempty strictly increasing sequence")
    if taus[0] < 0:
        raise DomainError("taus must be >= 0")
    p1_joint = p1 if p1_joint is None else p1_joint
    t1 = max(phase1_horizon or 0.0, taus[-1], horizon)
    old = integrate(Model.PHASE1, Phase1State.seeded(p1.s10, seed_f1), p1,
                    IntegrationConfig(cfg.step, t1, 1))

    run_cfg = IntegrationConfig(cfg.step, horizon, cfg.record_every)
    phases, reports, trajs = [], [], []
    for tau in taus:
        phase = force or classify_phase(old, tau, f1star)
        try:
            if phase is Phase.OUTBREAK:
                init = handoff_sti(old, tau, seed_f2, s_pool=p2.s20)
                traj = integrate(Model.STI, init, (p1_joint, p2), run_cfg)
            else:
                init = handoff_lti(old, tau, p2.s20, seed_f2)
                traj = integrate(Model.LTI, init, p2, run_cfg)
        except IntegrationError as exc:
            raise IntegrationError(f"tau={tau:g} h: {exc}", exc.time) from exc
        phases.append(phase)
        reports.append(extract_indices(traj, f2star, r0=r0_for_state(init, p2)))
        trajs.append(traj)
    return DelayScan(taus, tuple(phases), tuple(reports), tuple(trajs))
