import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lelab.green import (R_STAR, GreenError, GreenEvaluator, antipodal_psi, find_critical_point,
                         grad_hess_psi, green_disk, kirchhoff_routh, regular_disk, robin_disk,
                         sample_pairs, w_from_hessian, w_matrix)
from lelab.mesh import DomainSpec, build_mesh

DISK = DomainSpec.disk()
SQUARE = DomainSpec.rectangle(1, 1)


def images_psi(r):
    # independent oracle: images formulas composed for an antipodal pair at radius r
    return math.log((1 + r * r) / (2 * r * (1 - r * r))) / math.pi


@pytest.fixture(scope="module")
def disk_numeric():
    return GreenEvaluator(DISK, "numeric", h=0.05)


@pytest.fixture(scope="module")
def square_numeric():
    return GreenEvaluator(SQUARE, "numeric", h=0.05)


def test_disk_closed_form_values():
    assert robin_disk((0.0, 0.0)) == 0.0
    assert robin_disk((0.5, 0.0)) == pytest.approx(math.log(0.75) / (2 * math.pi), abs=1e-12)
    # the quoted decimals are rounded; the formula is the oracle
    assert robin_disk((0.5, 0.0)) == pytest.approx(-0.045779, abs=1e-5)
    assert green_disk((0.5, 0), (-0.5, 0)) == pytest.approx(math.log(1.25) / (2 * math.pi), abs=1e-12)
    assert green_disk((0.5, 0), (-0.5, 0)) == pytest.approx(0.035514, abs=1e-6)
    assert regular_disk((0.0, 0.0), (0.3, 0.2)) == 0.0


def test_singular_pair_rejected():
    with pytest.raises(GreenError):
        green_disk((0.2, 0.1), (0.2, 0.1))
    with pytest.raises(GreenError):
        GreenEvaluator(DISK).green((0.2, 0.1), (0.2, 0.1))


def test_numeric_matches_images(disk_numeric):
    assert disk_numeric.green((0.3, 0), (-0.3, 0)) == pytest.approx(green_disk((0.3, 0), (-0.3, 0)), abs=1e-3)
    assert disk_numeric.robin((0.5, 0)) == pytest.approx(-0.045779, abs=1e-3)


def test_numeric_source_near_boundary(disk_numeric):
    with pytest.raises(GreenError):
        disk_numeric.robin((0.95, 0.0))


def test_square_numeric_symmetry(square_numeric):
    a, b = (0.3, 0.25), (0.7, 0.6)
    assert square_numeric.green(a, b) == pytest.approx(square_numeric.green(b, a), abs=1e-3)


def test_analytic_rectangle_agrees_with_numeric(square_numeric):
    an = GreenEvaluator(SQUARE)
    assert an.mode == "analytic-rectangle"
    for a, b in [((0.3, 0.3), (0.7, 0.7)), ((0.5, 0.2), (0.4, 0.8))]:
        assert an.green(a, b) == pytest.approx(square_numeric.green(a, b), abs=1e-3)


@pytest.mark.parametrize("domain", [DISK, SQUARE], ids=["disk", "square"])
def test_symmetry_and_positivity_sampled(domain):
    ev = GreenEvaluator(domain)
    pairs = sample_pairs(domain, 100, np.random.default_rng(3))
    for a, b in pairs:
        g = ev.green(a, b)
        assert g > 0
        assert g == pytest.approx(ev.green(b, a), rel=1e-10, abs=1e-12)


def test_symmetry_and_positivity_numeric_polygon():
    dom = DomainSpec.parse("polygon:0,0;2,0;2,1;1,1;1,2;0,2")
    ev = GreenEvaluator(dom, "numeric", h=0.05)
    pairs = sample_pairs(dom, 100, np.random.default_rng(5), margin=0.15, min_sep=0.15)
    for a, b in pairs:
        g = ev.green(a, b)
        assert g > 0
        assert g == pytest.approx(ev.green(b, a), abs=1e-3)


def test_numeric_robin_second_order():
    pts = [(r * math.cos(t), r * math.sin(t)) for r in (0.0, 0.4, 0.75) for t in (0.3, 2.0, 4.1)]
    hs = np.array([0.1, 0.05, 0.025])
    errs = []
    for h in hs:
        ev = GreenEvaluator(DISK, "numeric", h=h)
        errs.append(max(abs(ev.robin(x) - robin_disk(x)) for x in pts))
    order = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert 1.7 <= order <= 2.3, (errs, order)


def test_kirchhoff_routh_disk_values():
    ev = GreenEvaluator(DISK)
    rep = kirchhoff_routh(ev, (0.5, 0), (-0.5, 0))
    assert rep.psi == pytest.approx(images_psi(0.5), abs=1e-12)
    assert rep.psi == pytest.approx(0.162602, abs=1e-5)
    assert rep.psi1 == pytest.approx(rep.psi / 2, abs=1e-10)
    assert rep.psi2 == pytest.approx(rep.psi / 2, abs=1e-10)
    assert rep.psi == rep.psi1 + rep.psi2
    assert ev.psi((0.1, 0.3), (-0.4, 0.2)) == pytest.approx(ev.psi((-0.4, 0.2), (0.1, 0.3)), abs=1e-14)


def test_antipodal_closed_form_matches_oracle():
    # sympy is the independent oracle for the value at r*
    sp = pytest.importorskip("sympy")
    r = sp.sqrt(sp.sqrt(5) - 2)
    exact = sp.log((1 + r ** 2) / (2 * r * (1 - r ** 2))) / sp.pi
    assert antipodal_psi(R_STAR) == pytest.approx(float(sp.N(exact, 30)), abs=1e-14)
    assert antipodal_psi(R_STAR) == pytest.approx(0.16230060300988983, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 0.85), st.floats(0, 2 * math.pi), st.floats(0.05, 0.85),
       st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi))
def test_rotation_invariance(r1, t1, r2, t2, q):
    ev = GreenEvaluator(DISK)
    a = (r1 * math.cos(t1), r1 * math.sin(t1))
    b = (r2 * math.cos(t2), r2 * math.sin(t2))
    if math.dist(a, b) < 1e-3:
        return
    c, s = math.cos(q), math.sin(q)
    rot = lambda v: (c * v[0] - s * v[1], s * v[0] + c * v[1])  # noqa: E731
    assert ev.psi(rot(a), rot(b)) == pytest.approx(ev.psi(a, b), abs=1e-10)


def test_gradient_at_critical_radius():
    ev = GreenEvaluator(DISK)
    g, _ = grad_hess_psi(ev, (R_STAR, 0), (-R_STAR, 0))
    assert np.linalg.norm(g) <= 1e-6


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 0.8))
def test_gradient_antisymmetry(r):
    ev = GreenEvaluator(DISK)
    g, _ = grad_hess_psi(ev, (r, 0), (-r, 0))
    assert np.allclose(g[:2], -g[2:], atol=1e-8)


def test_gradient_matches_one_sided_oracle():
    ev = GreenEvaluator(DISK)
    a1, a2 = np.array([0.21, -0.13]), np.array([-0.35, 0.42])
    g, _ = grad_hess_psi(ev, a1, a2)
    d = np.array([0.3, -0.5, 0.7, 0.2])
    d /= np.linalg.norm(d)
    z = np.concatenate([a1, a2])
    t = 1e-7
    # second-order one-sided difference at a different step
    fd = (-3 * ev.psi_flat(z) + 4 * ev.psi_flat(z + t * d) - ev.psi_flat(z + 2 * t * d)) / (2 * t)
    assert g @ d == pytest.approx(fd, rel=1e-5)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-0.6, 0.6), min_size=4, max_size=4))
def test_det_w_equals_det_hessian(v):
    ev = GreenEvaluator(DISK)
    a1, a2 = np.array(v[:2]), np.array(v[2:])
    if np.linalg.norm(a1 - a2) < 0.1:
        return
    _, hess = grad_hess_psi(ev, a1, a2)
    W, det = w_from_hessian(hess)
    assert abs(det) == pytest.approx(abs(np.linalg.det(hess)), rel=1e-8)
    assert np.array_equal(W[:2, :2], hess[:2, :2])
    assert np.array_equal(W[:2, 2:], -hess[:2, 2:])


def test_w_matrix_singular_at_critical_pair():
    ev = GreenEvaluator(DISK)
    W, det = w_matrix(ev, (R_STAR, 0), (-R_STAR, 0))
    assert abs(det) <= 1e-6 * np.abs(W).max() ** 4


def test_find_critical_point_disk():
    ev = GreenEvaluator(DISK)
    cp = find_critical_point(ev, ((0.3, 0.1), (-0.2, -0.3)))
    assert cp.grad_norm <= 1e-6
    for a in cp.pair:
        assert math.hypot(*a) == pytest.approx(0.485868, abs=1e-4)
    assert cp.pair[0][1] == 0.0 and cp.pair[0][0] > 0
    assert cp.psi_value == pytest.approx(antipodal_psi(R_STAR), abs=1e-6)
    assert cp.classification == "min"
    assert np.all(cp.hessian_eigenvalues >= -1e-6)


def test_find_critical_point_square_diagonal():
    ev = GreenEvaluator(SQUARE)
    cp = find_critical_point(ev, ((0.25, 0.35), (0.7, 0.65)))
    (x1, y1), (x2, y2) = cp.pair
    # reflection across x = y maps the pair onto itself (possibly swapped)
    assert min(abs(x1 - y1) + abs(x2 - y2), abs(x1 - y2) + abs(x2 - y1)) <= 1e-3

    # independent oracle: minimize over the symmetric slice a1 = (t, t), a2 = (1 - t, 1 - t)
    from scipy.optimize import minimize_scalar

    res = minimize_scalar(lambda t: ev.psi((t, t), (1 - t, 1 - t)), bounds=(0.05, 0.45), method="bounded",
                          options={"xatol": 1e-10})
    assert min(abs(x1 - res.x), abs(x2 - res.x)) <= 1e-3


def test_find_critical_point_escape():
    from lelab.green import BoundaryEscapeError

    ev = GreenEvaluator(DISK)
    with pytest.raises(BoundaryEscapeError):
        find_critical_point(ev, ((0.995, 0.0), (-0.2, 0.0)))


def test_numeric_evaluator_reuses_mesh():
    m = build_mesh(DISK, 0.1)
    ev = GreenEvaluator(DISK, "numeric", mesh=m)
    assert ev.h == m.h and not ev.analytic
