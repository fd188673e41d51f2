import numpy as np
import pytest

from bandedge import coefficients as co
from bandedge.errors import NotDivergenceFree, NotPositive
from bandedge.lattice import Lattice2D

SQ = Lattice2D.square()


def divfree(m=(0, 1), amp=0.3):
    return co.divfree_harmonic(SQ, m, amp)


# -- gauge normalization -------------------------------------------------------

def test_gauge_removes_pure_gradient():
    a_raw = co.gradient(co.sine(SQ, (1, 0), 0.8))
    rep = co.gauge_normalize(a_raw)
    assert rep.A_normalized.max_amplitude() < 1e-14
    assert np.allclose(rep.k_shift, 0.0)


def test_gauge_removes_constant():
    a_raw = co.constant_vector(SQ, [0.3, -0.1])
    rep = co.gauge_normalize(a_raw)
    assert rep.A_normalized.max_amplitude() < 1e-14
    assert np.allclose(rep.k_shift, [0.3, -0.1])


def test_gauge_passes_transverse_part_through():
    harmonic = divfree((1, 0), 0.25)
    a_raw = harmonic + co.gradient(co.cosine(SQ, (0, 1), 0.5)) \
        + co.constant_vector(SQ, [0.1, 0.2])
    rep = co.gauge_normalize(a_raw)
    assert (rep.A_normalized - harmonic).max_amplitude() < 1e-12
    assert co.divergence_residual(rep.A_normalized) < 1e-10
    assert np.max(np.abs(rep.A_normalized.mean())) < 1e-10


def test_gauge_idempotent():
    a_raw = divfree((1, 1), 0.4) + co.gradient(co.sine(SQ, (2, 0), 0.3))
    rep1 = co.gauge_normalize(a_raw)
    rep2 = co.gauge_normalize(rep1.A_normalized)
    assert (rep2.A_normalized - rep1.A_normalized).max_amplitude() < 1e-12
    assert np.max(np.abs(rep2.k_shift)) < 1e-14


# -- stream function -----------------------------------------------------------

def test_stream_function_zero():
    phi = co.stream_function(co.zero_vector(SQ))
    assert phi.max_amplitude() == 0.0


def test_stream_function_single_harmonic():
    c = 0.35
    a = co.FourierField(SQ, {(1, 0): [0, c], (-1, 0): [0, c]}, 2)
    phi = co.stream_function(a)
    assert phi.amplitude((1, 0)) == pytest.approx(c / (2j * np.pi), abs=1e-15)
    # Componentwise reconstruction grad(phi) = (A2, -A1).
    grad = co.gradient(phi)
    target = co.FourierField(
        SQ, {m: np.array([v[1], -v[0]]) for m, v in a.terms.items()}, 2
    )
    assert (grad - target).max_amplitude() < 1e-10


def test_stream_function_zero_mean():
    phi = co.stream_function(divfree((2, 1), 0.7))
    assert phi.amplitude((0, 0)) == 0.0


def test_stream_function_laplacian_is_curl():
    a = divfree((1, 0), 0.5) + divfree((1, 2), 0.2)
    phi = co.stream_function(a)
    assert (phi.laplacian() - co.curl(a)).max_amplitude() < 1e-12


def test_stream_function_rejects_divergent_field():
    bad = co.vector_cosine(SQ, (1, 0), [1.0, 0.0], 0.5)  # parallel to xi
    with pytest.raises(NotDivergenceFree):
        co.stream_function(bad)


# -- curl ------------------------------------------------------------------------

def test_curl_constant_is_zero():
    a = co.vector_cosine(SQ, (0, 0), [0.4, 0.9], 1.0)
    assert co.curl(a).max_amplitude() == 0.0


def test_curl_single_harmonic():
    # A = (sin-profile in x2, 0): hat A1(0, +/-1) = -/+ amp/(2i) pattern.
    amp = 0.6
    a1 = co.sine(SQ, (0, 1), -amp)
    a = co.FourierField(SQ, {m: [v, 0.0] for m, v in a1.terms.items()}, 2)
    b = co.curl(a)
    xi2 = SQ.frequency((0, 1))[1]
    expect = -1j * xi2 * a1.amplitude((0, 1))
    assert b.amplitude((0, 1)) == pytest.approx(expect, abs=1e-15)


def test_curl_ignores_gradient_part():
    a = divfree((1, 1), 0.3)
    a_raw = a + co.gradient(co.cosine(SQ, (2, 1), 0.8))
    assert (co.curl(a_raw) - co.curl(a)).max_amplitude() < 1e-12


# -- invert_square ---------------------------------------------------------------

def test_invert_square_constant_one():
    out = co.invert_square(co.constant(SQ, 1.0), 4)
    assert set(out.terms) == {(0, 0)}
    assert out.amplitude((0, 0)) == pytest.approx(1.0, abs=1e-14)


def test_invert_square_constant_two():
    out = co.invert_square(co.constant(SQ, 2.0), 4)
    assert out.amplitude((0, 0)) == pytest.approx(0.25, abs=1e-14)


def test_invert_square_against_fine_grid_oracle():
    omega = co.constant(SQ, 1.0) + co.cosine(SQ, (1, 0), 0.1)
    out = co.invert_square(omega, 8)
    oracle = co.analyze_grid(SQ, 1.0 / omega.sample(1024).real ** 2, 8)
    keys = set(out.terms) | set(oracle.terms)
    worst = max(abs(out.amplitude(m) - oracle.amplitude(m)) for m in keys)
    assert worst < 1e-10


def test_invert_square_reconstruction_bound():
    omega = co.constant(SQ, 1.0) + co.cosine(SQ, (1, 1), 0.2)
    out = co.invert_square(omega, 12)
    prod = omega.convolve(omega).convolve(out)
    vals = prod.sample(co.grid_size(prod.support_radius())).real
    assert np.max(np.abs(vals - 1.0)) < 1e-8


def test_invert_square_rejects_sign_changing_omega():
    with pytest.raises(NotPositive):
        co.invert_square(co.cosine(SQ, (1, 0), 1.0), 4)


# -- validation -------------------------------------------------------------------

def test_validate_free_set():
    cs = co.free_set(SQ)
    rep = co.validate(cs)
    assert rep.passed
    assert rep.m_g == pytest.approx(1.0, abs=1e-12)
    assert cs.m_g == rep.m_g


def test_validate_flags_nonzero_mean():
    cs = co.CoefficientSet(
        V=co.constant(SQ, 0.0),
        A=co.constant_vector(SQ, [0.5, 0.0]),
        omega=co.constant(SQ, 1.0),
    )
    rep = co.validate(cs)
    assert not rep.passed
    failing = {c.name for c in rep.checks if not c.passed}
    assert "A zero mean" in failing


def test_validate_certifies_m_g():
    cs = co.CoefficientSet(
        V=co.constant(SQ, 0.0),
        A=co.zero_vector(SQ),
        omega=co.constant(SQ, 1.0) + co.cosine(SQ, (1, 0), 0.5),
    )
    rep = co.validate(cs)
    assert rep.passed
    # min over the cell of (1 + 0.5 cos)^2 = 0.25; certified within margin.
    assert rep.m_g <= 0.25
    assert rep.m_g >= 0.25 - rep.safety_margin - 1e-12
    assert rep.safety_margin <= 0.02 * 0.25 + 1e-12


def test_realness_invariant_on_constructors():
    fields = [
        co.cosine(SQ, (2, 1), 0.7),
        co.sine(SQ, (1, 1), -0.4),
        divfree((1, 0), 0.9),
    ]
    for f in fields:
        assert f.realness_residual() < 1e-15


def test_gauge_rejects_complex_field():
    from bandedge.errors import NotRealValued
    bad = co.FourierField(SQ, {(1, 0): np.array([0.3j, 0.0])}, 2)
    with pytest.raises(NotRealValued):
        co.gauge_normalize(bad)
