import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kaclab.coeffs import LAW_KINDS, RngStream, make_law, parse_law, sample_coeffs, stream_index_for

ALL_LAWS = ["gaussian-complex", "gaussian-real", "rademacher", "uniform-real", "two-point(0.2)"]
T = 10**6


def test_rademacher_law():
    law = make_law("rademacher")
    assert law.pseudo_moment == 1
    assert law.support() == (-1.0, 1.0)


def test_gaussian_complex_pseudo_moment_zero():
    assert make_law("gaussian-complex").pseudo_moment == 0


def test_uniform_range_and_variance():
    law = make_law("uniform-real")
    x = law.draw(RngStream(1, 0).generator, 10**5).real
    assert np.all(np.abs(x) <= math.sqrt(3))
    assert abs(np.mean(x**2) - 1) < 5 * math.sqrt(law.fourth_moment / 10**5)


def test_make_law_rejects_bad_input():
    with pytest.raises(ValueError):
        make_law("cauchy")
    with pytest.raises(ValueError):
        make_law("two-point", {"p": 1.0})
    with pytest.raises(ValueError):
        make_law("two-point", {})
    with pytest.raises(ValueError):
        make_law("rademacher", {"p": 0.5})


def test_parse_law_names():
    assert parse_law("two-point(0.2)").p == 0.2
    assert parse_law("two-point(0.2)").name == "two-point(0.2)"
    for name in ALL_LAWS:
        assert parse_law(name).name == name
    assert set(LAW_KINDS) == {"gaussian-complex", "gaussian-real", "rademacher", "uniform-real", "two-point"}


def test_sample_support_and_replay():
    law = make_law("rademacher")
    a = sample_coeffs(law, 4, RngStream(7, 3))
    b = sample_coeffs(law, 4, RngStream(7, 3))
    assert a.size == 5
    assert set(a.real) <= {-1.0, 1.0}
    assert np.array_equal(a, b)


def test_sample_rejects_degree_zero():
    with pytest.raises(ValueError):
        sample_coeffs(make_law("rademacher"), 0, RngStream(0, 0))


def test_gaussian_complex_million_draws():
    x = sample_coeffs(make_law("gaussian-complex"), T - 1, RngStream(11, 0))
    assert abs(x.mean()) <= 5e-3
    assert abs(np.mean(np.abs(x) ** 2) - 1) <= 5e-3


@pytest.mark.parametrize("name", ALL_LAWS)
def test_moments_match_law(name):
    law = parse_law(name)
    x = law.draw(RngStream(2024, stream_index_for(name, 0)).generator, T)
    tol = 5 / math.sqrt(T)
    assert abs(x.mean()) <= tol
    assert abs(np.mean(np.abs(x) ** 2) - 1) <= 5 * math.sqrt(law.fourth_moment) / math.sqrt(T)
    assert abs(np.mean(x**2) - law.pseudo_moment) <= 5 * math.sqrt(law.fourth_moment) / math.sqrt(T)


@pytest.mark.parametrize("name", ALL_LAWS)
def test_fourth_moment_closed_form(name):
    law = parse_law(name)
    x = law.draw(RngStream(5, 1).generator, T)
    emp = np.mean(np.abs(x) ** 4)
    assert abs(emp - law.fourth_moment) < 0.05 * law.fourth_moment


def test_stream_independence():
    law = make_law("gaussian-real")
    a = law.draw(RngStream(9, 0).generator, T).real
    b = law.draw(RngStream(9, 1).generator, T).real
    assert abs(np.corrcoef(a, b)[0, 1]) <= 5 / math.sqrt(T)


def test_two_point_atoms():
    law = make_law("two-point", {"p": 0.2})
    hi, lo = law.support()
    assert hi == pytest.approx(2.0)
    assert lo == pytest.approx(-0.5)
    assert 0.2 * hi + 0.8 * lo == pytest.approx(0.0, abs=1e-15)


def test_counter_resume():
    s = RngStream(3, 4)
    s.generator.random(8)  # 8 doubles = 2 Philox blocks
    resumed = RngStream(3, 4, counter=s.counter)
    assert np.array_equal(s.generator.random(4), resumed.generator.random(4))


@given(st.text(max_size=30), st.integers(0, 2**20))
@settings(max_examples=50, deadline=None)
def test_stream_index_is_stable_and_injective_in_trial(cell, t):
    assert stream_index_for(cell, t) == stream_index_for(cell, t)
    assert stream_index_for(cell, t) != stream_index_for(cell, t + 1)
