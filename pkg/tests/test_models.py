import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ref_rhs_lti, ref_rhs_phase1, ref_rhs_sti
from dtsfi.errors import DomainError, OutOfRangeError
from dtsfi.estimation import phase1_trajectory
from dtsfi.integrator import IntegrationConfig, integrate
from dtsfi.models import (
    LtiPhase2State,
    Model,
    Phase1Params,
    Phase1State,
    Phase2Params,
    StiPhase2State,
    handoff_lti,
    handoff_sti,
    rhs_lti_phase2,
    rhs_phase1,
    rhs_sti_phase2,
    theta_for,
)

count = st.floats(0.0, 1e7, allow_nan=False, allow_infinity=False)
rate = st.floats(0.0, 1.0, allow_nan=False)
prob = st.floats(0.0, 1.0, allow_nan=False)
pos_rate = st.floats(1e-3, 10.0, allow_nan=False)


@st.composite
def phase1_params(draw):
    return Phase1Params(draw(st.floats(0, 1e-3)), draw(prob), draw(pos_rate), draw(st.floats(1.0, 1e7)))


@st.composite
def phase2_params(draw):
    p2 = draw(prob)
    cap = 10.0 if p2 <= 0.1 else 1.0 / p2
    ms = [draw(st.floats(0.0, cap)) for _ in range(3)]
    return Phase2Params(
        draw(st.floats(0, 1e-2)), draw(st.floats(0, 1e-2)), draw(st.floats(0, 1e-3)),
        *ms, p2, draw(pos_rate), draw(st.floats(0.0, 1e7)),
    )


def _rel(total):
    return max(1.0, abs(total))


# --------------------------------------------------------------------------
# Parameter validation
# --------------------------------------------------------------------------


@pytest.mark.parametrize("field,value", [("beta1", -1e-9), ("alpha1", 0.0), ("p1", 1.5), ("s10", 0.0),
                                         ("beta1", np.nan), ("alpha1", np.inf)])
def test_phase1_params_reject(field, value):
    good = dict(beta1=1e-4, p1=0.5, alpha1=1.0, s10=1e4)
    good[field] = value
    with pytest.raises(DomainError):
        Phase1Params(**good)


def test_phase2_params_allow_m_above_one_when_product_small(pub):
    p = pub["C_lti"]
    assert p.m22 > 1 and p.m22 * p.p2 < 1


def test_phase2_params_reject_m_times_p_above_one(pub):
    with pytest.raises(DomainError, match="m22"):
        pub["C_lti"].replace(m22=5.0, p2=0.5)


@pytest.mark.parametrize("field,value", [("alpha2", 0.0), ("p2", -0.1), ("s20", -1.0), ("beta23", -1.0)])
def test_phase2_params_reject(pub, field, value):
    with pytest.raises(DomainError):
        pub["C_lti"].replace(**{field: value})


def test_params_dict_roundtrip(pub):
    for p in (pub["B_phase1"], pub["C_lti"]):
        assert type(p).from_dict(p.to_dict()) == p


# --------------------------------------------------------------------------
# Vector fields: explicit examples
# --------------------------------------------------------------------------


def test_phase1_no_forwarders_no_dynamics(pub):
    d = rhs_phase1(Phase1State(5e4, 0.0, 10.0, 3.0, 10.0), pub["A_early"])
    assert all(v == 0 for v in d.as_array())


def test_phase1_full_adoption_leaves_direct_immune_fixed(pub):
    d = rhs_phase1(Phase1State(5e4, 12.0, 1.0, 0.0, 13.0), pub["A_early"].replace(p1=1.0))
    assert d.i1_minus == 0


def test_phase1_forwarding_rate_matches_hand_product(pub):
    p = pub["A_early"]
    d = rhs_phase1(Phase1State(5.1682e4, 47.0, 0.0, 0.0, 47.0), p)
    expected = 0.9823 * 8.27e-5 * 5.1682e4 * 47
    assert d.c1 == pytest.approx(expected, rel=1e-12)
    assert d.f1 == pytest.approx(expected - 3.9986 * 47, rel=1e-12)


def test_lti_no_forwarders_no_dynamics(pub):
    d = rhs_lti_phase2(LtiPhase2State(1e6, 10.0, 20.0, 0.0, 5.0, 7.0), pub["C_lti"])
    assert all(v == 0 for v in d.as_array())


def test_lti_zero_attractiveness_is_pure_decay(pub):
    p = pub["C_lti"].replace(m21=0.0, m22=0.0, m23=0.0)
    d = rhs_lti_phase2(LtiPhase2State(1e6, 10.0, 20.0, 30.0, 5.0, 30.0), p)
    assert d.f2 == pytest.approx(-p.alpha2 * 30.0, rel=1e-15)
    assert d.c2 == 0


def test_lti_conserves_at_published_params(pub):
    y = LtiPhase2State(7.4e6, 993.0, 6.0e5, 20.0, 11.0, 20.0)
    d = rhs_lti_phase2(y, pub["C_lti"]).as_array()
    assert abs(d[:5].sum()) <= 1e-12 * y.total()


def test_sti_conserves_at_published_params(pub):
    q1, q2 = pub["AB_sti"]
    y = StiPhase2State(7.4e6, 67.5, 456.0, 8.6, 15.0, 3.0, 523.6, 15.0)
    d = rhs_sti_phase2(y, q1, q2).as_array()
    scale = np.abs(d[:6]).max()
    assert abs(d[:6].sum()) <= 1e-12 * scale


def test_sti_without_new_information_embeds_phase1(pub):
    q1, q2 = pub["AB_sti"]
    y = StiPhase2State(5e4, 60.0, 400.0, 9.0, 0.0, 0.0, 460.0, 0.0)
    d = rhs_sti_phase2(y, q1, q2)
    d1 = rhs_phase1(Phase1State(5e4, 60.0, 400.0, 9.0, 460.0), q1)
    assert (d.s1, d.f1, d.i1_plus, d.i1_minus, d.c1) == (d1.s1, d1.f1, d1.i1_plus, d1.i1_minus, d1.c1)
    assert d.f2 == d.i2 == d.c2 == 0


def test_sti_without_old_information_is_plain_sfi(pub):
    q1, q2 = pub["AB_sti"]
    y = StiPhase2State(5e4, 0.0, 0.0, 0.0, 15.0, 2.0, 0.0, 15.0)
    d = rhs_sti_phase2(y, q1, q2)
    as_sfi = Phase1Params(q2.beta23, q2.m23 * q2.p2, q2.alpha2, 5e4)
    d1 = rhs_phase1(Phase1State(5e4, 15.0, 0.0, 0.0, 15.0), as_sfi)
    assert d.s1 == pytest.approx(d1.s1, rel=1e-14)
    assert d.f2 == pytest.approx(d1.f1, rel=1e-14)
    assert d.c2 == pytest.approx(d1.c1, rel=1e-14)
    assert d.i2 == pytest.approx(d1.i1_plus + d1.i1_minus, rel=1e-14)


@pytest.mark.parametrize("fn,state", [
    (rhs_phase1, Phase1State(np.nan, 1.0, 0.0, 0.0, 1.0)),
    (rhs_phase1, Phase1State(1.0, -1.0, 0.0, 0.0, 1.0)),
])
def test_rhs_rejects_bad_state(pub, fn, state):
    with pytest.raises(DomainError):
        fn(state, pub["A_early"])


def test_lti_rhs_rejects_infinite_state(pub):
    with pytest.raises(DomainError):
        rhs_lti_phase2(LtiPhase2State(np.inf, 0, 0, 1, 0, 1), pub["C_lti"])


# --------------------------------------------------------------------------
# Vector fields: properties
# --------------------------------------------------------------------------


@settings(max_examples=300)
@given(y=st.tuples(*[count] * 4), p=phase1_params())
def test_phase1_matches_reference_and_conserves(y, p):
    state = Phase1State(*y, y[1] + y[2])
    d = rhs_phase1(state, p).as_array()
    ref = ref_rhs_phase1(state.as_array(), p.beta1, p.p1, p.alpha1)
    np.testing.assert_allclose(d, ref, rtol=1e-12, atol=1e-12 * np.abs(ref).max(initial=1.0))
    assert abs(d[:4].sum()) <= 1e-10 * _rel(np.abs(d[:4]).max(initial=0.0))
    assert d[4] >= 0


@settings(max_examples=300)
@given(y=st.tuples(*[count] * 5), p=phase2_params())
def test_lti_matches_reference_and_conserves(y, p):
    state = LtiPhase2State(*y, 0.0)
    d = rhs_lti_phase2(state, p).as_array()
    ref = ref_rhs_lti(state.as_array(), p)
    np.testing.assert_allclose(d, ref, rtol=1e-12, atol=1e-12 * np.abs(ref).max(initial=1.0))
    assert abs(d[:5].sum()) <= 1e-10 * _rel(np.abs(d[:5]).max(initial=0.0))
    assert d[5] >= 0


@settings(max_examples=300)
@given(y=st.tuples(*[count] * 6), q1=phase1_params(), p=phase2_params())
def test_sti_matches_reference_and_conserves(y, q1, p):
    state = StiPhase2State(*y, 0.0, 0.0)
    d = rhs_sti_phase2(state, q1, p).as_array()
    ref = ref_rhs_sti(state.as_array(), q1, p)
    np.testing.assert_allclose(d, ref, rtol=1e-12, atol=1e-12 * np.abs(ref).max(initial=1.0))
    assert abs(d[:6].sum()) <= 1e-10 * _rel(np.abs(d[:6]).max(initial=0.0))
    assert d[6] >= 0 and d[7] >= 0


@settings(max_examples=200)
@given(y=st.tuples(*[count] * 4), q1=phase1_params(), p=phase2_params())
def test_sti_with_zero_f2_equals_phase1_exactly(y, q1, p):
    s, f, ip, im = y
    d = rhs_sti_phase2(StiPhase2State(s, f, ip, im, 0.0, 0.0, f + ip, 0.0), q1, p)
    d1 = rhs_phase1(Phase1State(s, f, ip, im, f + ip), q1)
    assert (d.s1, d.f1, d.i1_plus, d.i1_minus, d.c1) == (d1.s1, d1.f1, d1.i1_plus, d1.i1_minus, d1.c1)


@settings(max_examples=200)
@given(y=st.tuples(*[count] * 5), p=phase2_params())
def test_lti_split_flows_sum_to_contact_flow(y, p):
    s2, ip, im, f2, i2 = y
    d = rhs_lti_phase2(LtiPhase2State(s2, ip, im, f2, i2, 0.0), p)
    contact = p.beta21 * ip * f2 + p.beta22 * im * f2 + p.beta23 * s2 * f2
    # forward part goes to C2, the rest to I2 (plus inactivation)
    split = d.c2 + (d.i2 - p.alpha2 * f2)
    scale = max(contact, p.alpha2 * f2)
    assert split == pytest.approx(contact, rel=1e-12, abs=1e-12 * scale)


# --------------------------------------------------------------------------
# Hand-off
# --------------------------------------------------------------------------


@pytest.fixture(scope="module")
def traj_a(pub):
    return phase1_trajectory(pub["A_early"], 47, 4.0)


def test_handoff_lti_at_origin_has_no_immune(pub):
    traj = integrate(Model.PHASE1, Phase1State.seeded(1e4, 0.0), pub["A_early"], IntegrationConfig(0.5, 1.0))
    init = handoff_lti(traj, 0.0, 7e6, 20)
    assert init == LtiPhase2State(7e6, 0.0, 0.0, 20.0, 0.0, 20.0)


def test_handoff_lti_at_end_uses_last_node(traj_a):
    init = handoff_lti(traj_a, traj_a.times[-1], 1e6, 20)
    assert init.i1_plus == traj_a["i1_plus"][-1]
    assert init.i1_minus == traj_a["i1_minus"][-1]


def test_handoff_lti_midpoint_interpolation_matches_reintegration(pub, traj_a):
    tau = 0.5 * (traj_a.times[100] + traj_a.times[101])
    init = handoff_lti(traj_a, tau, 1e6, 20)
    fine = phase1_trajectory(pub["A_early"], 47, tau, IntegrationConfig(0.005, 1.0))
    assert fine.times[-1] == pytest.approx(tau)
    assert init.i1_plus == pytest.approx(fine["i1_plus"][-1], rel=1e-4)
    assert init.i1_minus == pytest.approx(fine["i1_minus"][-1], rel=1e-4)


def test_handoff_out_of_range(traj_a):
    with pytest.raises(OutOfRangeError):
        handoff_lti(traj_a, 4.5, 1e6, 20)
    with pytest.raises(OutOfRangeError):
        handoff_sti(traj_a, -0.1, 15)


def test_handoff_needs_phase1_trajectory(pub, traj_a):
    lti = integrate(Model.LTI, handoff_lti(traj_a, 1.0, 1e6, 20), pub["C_lti"], IntegrationConfig(0.01, 1.0))
    with pytest.raises(TypeError):
        handoff_lti(lti, 0.5, 1e6, 20)


def test_handoff_sti_at_origin_is_initial_state_plus_seed(traj_a):
    init = handoff_sti(traj_a, 0.0, 15)
    s = traj_a.state(0)
    assert init == StiPhase2State(s.s1, s.f1, s.i1_plus, s.i1_minus, 15.0, 0.0, s.c1, 15.0)


def test_handoff_sti_zero_seed_keeps_new_information_absent(pub, traj_a):
    init = handoff_sti(traj_a, 2.0, 0.0)
    traj = integrate(Model.STI, init, pub["AB_sti"], IntegrationConfig(1e-3, 5.0))
    assert np.all(traj["f2"] == 0) and np.all(traj["c2"] == 0) and np.all(traj["i2"] == 0)


# F1(2 h) of the published early-A parameters, 47 initial forwarders.
# Frozen from a DOP853 solve at rtol 1e-12 (see test below for the live check).
F1_AT_2H = 67.54174


def test_handoff_sti_regression_value(traj_a):
    init = handoff_sti(traj_a, 2.0, 15)
    assert init.f1 == pytest.approx(F1_AT_2H, rel=1e-6)
    assert init.f2 == 15 and init.c2 == 15 and init.i2 == 0


def test_handoff_sti_regression_value_against_adaptive_solver(pub):
    from scipy.integrate import solve_ivp

    p = pub["A_early"]
    sol = solve_ivp(lambda t, y: ref_rhs_phase1(y, p.beta1, p.p1, p.alpha1), (0, 2.0),
                    [p.s10, 47, 0, 0, 47], method="DOP853", rtol=1e-12, atol=1e-12)
    assert sol.y[1, -1] == pytest.approx(F1_AT_2H, rel=1e-6)


def test_handoff_sti_shared_pool(traj_a):
    init = handoff_sti(traj_a, 2.0, 15, s_pool=1e6)
    reached = traj_a.states[0, 0] - traj_a.at(2.0).s1
    assert init.s1 == pytest.approx(1e6 - reached)
    with pytest.raises(DomainError):
        handoff_sti(traj_a, 2.0, 15, s_pool=10.0)


def test_theta_for_type_checks(pub):
    with pytest.raises(TypeError):
        theta_for(Model.LTI, pub["A_early"])
    assert theta_for(Model.STI, pub["AB_sti"]).shape == (11,)


def test_state_roundtrip():
    s = StiPhase2State(1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0)
    assert StiPhase2State.from_array(s.as_array()) == s
    assert s.total() == 21.0
    assert dataclasses.astuple(s) == tuple(s.as_array())
