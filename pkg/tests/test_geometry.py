import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bubblecluster import geometry as gm
from bubblecluster.radial_profiles import bubble_U

TWO_PI = 2 * np.pi


def polar(r, t):
    return r * np.exp(1j * t)


@pytest.fixture(scope="module")
def flower():
    return gm.star_domain(lambda th: 1.0 + 0.1 * np.cos(4 * th), 4)


def test_unit_disk_robin_zero():
    d = gm.disk(1.0, 4)
    x = polar(np.linspace(0, 0.9, 7), np.linspace(0, 3, 7))
    assert np.max(np.abs(gm.green(d, x, 0.0)["H"])) <= 1e-15
    assert d.robin_00 == 0.0


@pytest.mark.parametrize("R", [0.5, 2.0, 3.0])
def test_disk_robin_scaling(R):
    # G(., 0) vanishes on |x| = R with G = -log|x - y| / 2pi + H
    d = gm.disk(R, 4)
    assert gm.green(d, 0.0, 0.0)["H"] == pytest.approx(np.log(R) / TWO_PI, abs=1e-14)
    assert d.robin_00 == pytest.approx(np.log(R) / TWO_PI, abs=1e-14)


@settings(max_examples=50)
@given(st.floats(0, 0.95), st.floats(0, 6.3), st.floats(0, 0.95), st.floats(0, 6.3), st.floats(0.5, 2.0))
def test_green_symmetric(r1, t1, r2, t2, R):
    d = gm.disk(R, 4)
    x, y = polar(r1 * R, t1), polar(r2 * R, t2)
    assert gm.green(d, x, y)["H"] == pytest.approx(gm.green(d, y, x)["H"], abs=1e-10)


@settings(max_examples=30)
@given(st.floats(0, 0.95), st.floats(0, 6.3), st.floats(0, 6.3))
def test_green_vanishes_on_boundary(r, t, s):
    d = gm.disk(1.7, 4)
    y = polar(r * 1.7, t)
    assert abs(gm.green(d, polar(1.7, s), y)["G"]) <= 1e-12


def test_robin_identity_disk():
    for R in (1.0, 1.5):
        d = gm.disk(R, 4)
        x = polar(np.array([0.0, 0.3, 0.7]) * R, np.array([0.0, 0.4, 2.0]))
        assert np.max(gm.robin_ksym_identity_check(d, x)) <= 1e-12
        lhs = gm.green(gm.image_domain(d), x ** 4, 0.0)["H"]
        assert np.allclose(lhs, 4 * np.log(R) / TWO_PI, atol=1e-12)


def test_custom_domain_green(flower):
    # G vanishes on the boundary up to the reported collocation residual
    b = flower.boundary[::37]
    y = 0.2 + 0.1j
    _, resid = flower.mfs.fit(lambda s: np.log(np.abs(s - y)) / TWO_PI)
    g = gm.green(flower, b, y)["G"]
    assert resid <= 1e-4
    assert np.max(np.abs(g)) <= 1.01 * resid


def test_custom_domain_robin_identity(flower):
    x = polar(np.array([0.1, 0.3, 0.5]), np.array([0.2, 0.5, 0.1]))
    assert np.max(gm.robin_ksym_identity_check(flower, x)) <= 1e-4


def test_custom_domain_symmetry_check():
    with pytest.raises(ValueError):
        gm.star_domain(lambda th: 1.0 + 0.1 * np.cos(3 * th), 4)


def test_disk_json_round_trip(tmp_path):
    d = gm.disk(2.0, 5)
    path = tmp_path / "d.json"
    import json
    path.write_text(json.dumps(d.to_json()))
    e = gm.domain_from_json(path)
    assert e.is_disk and e.radius == 2.0 and e.k_sym == 5


def test_projection_of_bubble():
    d = gm.disk(1.0, 4)
    alpha = 0.05
    U1 = lambda x: bubble_U(np.abs(x) / alpha) - 2 * np.log(alpha)
    P = gm.project(d, U1)
    assert P.boundary_residual <= 1e-8
    # interior expansion P U1 = U(x/alpha) - log 8 - 4 log alpha + 8 pi H(0,0) + O(|x| + alpha^2)
    for x in (0.0, 0.01, 0.02 + 0.01j):
        ref = bubble_U(abs(x) / alpha) - np.log(8) - 4 * np.log(alpha) + 8 * np.pi * d.robin_00
        assert abs(P(x) - ref) <= 10 * (abs(x) + alpha ** 2)


def test_fourier_extension_harmonic():
    g = lambda w: np.real(w ** 3) + 2.0
    h = gm.FourierExtension(g, 1.0, 64)
    pts = polar(np.array([0.2, 0.5, 0.8]), np.array([0.3, 1.0, 2.0]))
    assert np.allclose(h(pts), g(pts), atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 0.8), st.floats(1e-4, 0.05))
def test_ring_harmonic_boundary_values(a, b):
    k = 4
    w = np.exp(1j * np.linspace(0, TWO_PI, 50))
    h = gm.ring_bubble_harmonic(w, a, b, 1.0, k)
    assert np.allclose(h, -2 * np.log(np.abs(w - a) ** 2 + b * b), atol=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 0.8), st.floats(1e-4, 0.05))
def test_ring_translation_boundary_values(a, b):
    w = np.exp(1j * np.linspace(0, TWO_PI, 50))
    h = gm.ring_translation_harmonic(w, a, b, 1.0, 4)
    ref = 4 * b * (w - a).real / (np.abs(w - a) ** 2 + b * b)
    assert np.allclose(h, ref, atol=1e-10)
