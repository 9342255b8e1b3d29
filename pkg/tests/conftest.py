import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dtsfi.io import load_fixture, posting_gap, published_params, reference_fits

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("default")


# --------------------------------------------------------------------------
# Reference vector fields written out term by term in plain numpy.  Tests use
# them as an oracle for the compiled kernels.
# --------------------------------------------------------------------------


def ref_rhs_phase1(y, beta1, p1, alpha1):
    s, f, ip, im, c = y
    contact = beta1 * s * f
    return np.array([-contact, p1 * contact - alpha1 * f, alpha1 * f, (1 - p1) * contact, p1 * contact])


def ref_rhs_lti(y, p):
    s2, ip, im, f2, i2, c2 = y
    a = p.beta21 * ip * f2
    b = p.beta22 * im * f2
    c = p.beta23 * s2 * f2
    fa, fb, fc = p.m21 * p.p2 * a, p.m22 * p.p2 * b, p.m23 * p.p2 * c
    return np.array([
        -c,
        -a,
        -b,
        fa + fb + fc - p.alpha2 * f2,
        (a - fa) + (b - fb) + (c - fc) + p.alpha2 * f2,
        fa + fb + fc,
    ])


def ref_rhs_sti(y, q1, p):
    s, f1, ip, im, f2, i2, c1, c2 = y
    contact = q1.beta1 * s * f1
    a0 = p.beta21 * f1 * f2
    a1 = p.beta21 * ip * f2
    b = p.beta22 * im * f2
    c = p.beta23 * s * f2
    k = p.p2
    fwd = p.m21 * k * (a0 + a1) + p.m22 * k * b + p.m23 * k * c
    return np.array([
        -contact - c,
        q1.p1 * contact - a0 - q1.alpha1 * f1,
        -a1 + q1.alpha1 * f1,
        (1 - q1.p1) * contact - b,
        fwd - p.alpha2 * f2,
        (a0 + a1 + b + c) - fwd + p.alpha2 * f2,
        q1.p1 * contact,
        fwd,
    ])


@pytest.fixture(scope="session")
def pub():
    return published_params()


@pytest.fixture(scope="session")
def ref():
    return reference_fits()


@pytest.fixture(scope="session")
def data():
    a, b, c = (load_fixture(x) for x in "ABC")
    return {"A": a, "B": b, "C": c, "tau_ab": posting_gap(a, b), "tau_bc": posting_gap(b, c)}
