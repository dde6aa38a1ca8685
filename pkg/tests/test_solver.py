import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import DISK_PAIR
from lelab.mesh import DomainSpec, build_mesh
from lelab.solver import (ContinuationPath, LaneEmdenProblem, NonConvergenceError, Solution,
                          concentration_mesh, continuation, energy, initial_solution, newton_solve,
                          seed_guess, seed_scale, solve_radial_nodal)

DISK = DomainSpec.disk()
NODAL = [(DISK_PAIR[0], 1), (DISK_PAIR[1], -1)]


@pytest.fixture(scope="module")
def disk_problem():
    return LaneEmdenProblem(build_mesh(DISK, 0.05))


@pytest.fixture(scope="module")
def positive10(disk_problem):
    return initial_solution(disk_problem, 10.0, [((0.0, 0.0), 1)])


@pytest.fixture(scope="module")
def nodal_problem():
    return LaneEmdenProblem(concentration_mesh(DISK, 0.05, list(DISK_PAIR), 20))


@pytest.fixture(scope="module")
def nodal10(nodal_problem):
    return continuation(nodal_problem, 10.0, 10.0, NODAL).entries[-1]


def test_seed_values(disk_problem):
    m = disk_problem.mesh
    u0 = seed_guess(m, 20, [((0.0, 0.0), 1)])
    k = int(np.argmin(np.hypot(*m.vertices.T)))
    assert np.hypot(*m.vertices[k]) == 0.0
    assert u0.values[k] == pytest.approx(math.sqrt(math.e), abs=1e-15)
    assert seed_scale(20) == pytest.approx((20 * math.exp(9.5)) ** -0.5, rel=1e-15)
    assert np.all(u0.values[m.boundary] == 0)


def test_seed_odd_symmetry(nodal_problem):
    m = nodal_problem.mesh
    u0 = seed_guess(m, 5, NODAL).values
    assert u0.max() > 0 > u0.min()
    assert abs(float(u0 @ (nodal_problem.M @ np.ones(m.n_vertices)))) <= 1e-6


def test_seed_overlap_rejected(disk_problem):
    with pytest.raises(ValueError):
        seed_guess(disk_problem.mesh, 5, [((0.0, 0.0), 1), ((0.01, 0.0), -1)])


def test_positive_solution(positive10):
    s = positive10
    assert s.values.min() >= 0
    assert s.mass == pytest.approx(8 * math.pi * math.e, rel=0.25)
    assert s.nehari_gap <= 1e-7
    assert np.all(s.values[s.mesh.boundary] == 0)


def test_fixed_point_converges_immediately(disk_problem, positive10):
    again = newton_solve(disk_problem, 10.0, positive10.values)
    assert again.newton_iters <= 2
    assert again.residual_norm <= 1e-11


def test_newton_errors(disk_problem):
    with pytest.raises(ValueError):
        newton_solve(disk_problem, 1.0, np.ones(disk_problem.mesh.n_vertices))
    with pytest.raises(ValueError):
        newton_solve(disk_problem, 3.0, np.zeros(disk_problem.mesh.n_vertices))
    with pytest.raises(NonConvergenceError) as info:
        newton_solve(disk_problem, 3.0, 1e-9 * np.ones(disk_problem.mesh.n_vertices), max_iter=3)
    assert info.value.last is not None


def test_nodal_solution(nodal10):
    s = nodal10
    assert s.values.max() > 0 > s.values.min()
    assert s.mass == pytest.approx(16 * math.pi * math.e, rel=0.25)
    assert s.nehari_gap <= 1e-7
    rep = energy(s)
    assert rep.rel_gap <= 1e-6


def test_nodal_odd_symmetry(nodal10):
    m = nodal10.mesh
    _, idx = m._kdtree.query(-m.vertices)
    assert np.abs(nodal10.values[idx] + nodal10.values).max() <= 1e-6


def test_energy_of_zero_field(disk_problem):
    z = Solution(disk_problem.mesh, 5.0, np.zeros(disk_problem.mesh.n_vertices), 0.0, 0, 0.0, 0.0, 0.0)
    rep = energy(z, disk_problem)
    assert rep.direct == 0.0 and rep.nehari == 0.0


def test_solution_roundtrip(tmp_path, positive10):
    f = tmp_path / "s.json"
    positive10.save(f)
    back = Solution.load(f, positive10.mesh)
    assert np.array_equal(back.values, positive10.values)
    assert back.p == positive10.p
    other = build_mesh(DISK, 0.2)
    with pytest.raises(ValueError):
        Solution.load(f, other)


def test_path_requires_increasing_p(positive10):
    path = ContinuationPath()
    path.append(positive10)
    with pytest.raises(ValueError):
        path.append(positive10)


def test_peak_value_refinement_second_order():
    vals = []
    for h in (0.1, 0.05, 0.025):
        pr = LaneEmdenProblem(concentration_mesh(DISK, h, list(DISK_PAIR), 20))
        vals.append(continuation(pr, 10.0, 10.0, NODAL).entries[-1].u_max_plus)
    d1, d2 = abs(vals[1] - vals[0]), abs(vals[2] - vals[1])
    # halving h should cut the change by about 4
    assert d2 / d1 <= 0.35, vals


def test_radial_nodal_p100():
    r = solve_radial_nodal(100)
    assert r.max_positive == pytest.approx(2.46, rel=0.05)
    assert r.max_negative == pytest.approx(1.17, rel=0.05)
    assert abs(r.boundary_value) <= 1e-10
    assert 0 < r.node_radius < 1


@settings(max_examples=8, deadline=None)
@given(st.floats(1.5, 30))
def test_radial_nodal_construction(p):
    r = solve_radial_nodal(p)
    assert abs(r.boundary_value) <= 1e-10
    assert 0 < r.node_radius < 1
    inner = r.values[(r.radii > 0) & (r.radii < r.node_radius * 0.999)]
    outer = r.values[(r.radii > r.node_radius * 1.001) & (r.radii < 0.999)]
    assert np.all(inner > 0) and np.all(outer < 0)


def test_radial_rejects_small_p():
    with pytest.raises(ValueError):
        solve_radial_nodal(1.0)


def test_path_mass_and_nehari(coarse_path):
    _, path = coarse_path.value
    ps = path.ps
    assert np.all(np.diff(ps) > 0)
    assert len(path.entries) <= 40
    for s in path.entries:
        assert s.nehari_gap <= 1e-7


@pytest.mark.slow
def test_disk_energy_at_p40(disk_path):
    _, path = disk_path.value
    s = min(path.entries, key=lambda e: abs(e.p - 40))
    assert abs(s.p - 40) <= 5
    assert s.p * s.energy == pytest.approx(8 * math.pi * math.e, rel=0.15)
