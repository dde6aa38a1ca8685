"""Positive and nodal solutions of ``-lap u = |u|^{p-1} u`` with zero boundary values.

Finite-element Newton iteration with continuation in ``p``, plus a radial
shooting solver for the radially symmetric nodal branch of the unit disk.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .fem import (SolverError, ScalarField, assemble, integrate, load_vector,
                  quadrature_values, weighted_mass)
from .mesh import DomainSpec, GradedPatch, Mesh, build_mesh

log = logging.getLogger(__name__)

SQRT_E = math.sqrt(math.e)


class NonConvergenceError(SolverError):
    """Newton failed; ``last`` holds the final iterate."""

    def __init__(self, msg, last=None, p=None):
        super().__init__(msg)
        self.last, self.p = last, p


class PathTerminationError(SolverError):
    """Continuation step underflow; ``path`` holds the entries computed so far."""

    def __init__(self, msg, path=None):
        super().__init__(msg)
        self.path = path


def limit_profile(z2):
    """``U`` as a function of the squared radius."""
    return -2.0 * np.log1p(z2 / 8.0)


def seed_scale(p: float) -> float:
    """Width of the seed bumps, ``(p e^{(p-1)/2})^{-1/2}``."""
    return (p * math.exp((p - 1.0) / 2.0)) ** -0.5


# --------------------------------------------------------------------------
# problem and solution containers


class LaneEmdenProblem:
    """Mesh plus assembled operators, shared by every solve on that mesh."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.K, self.M = assemble(mesh)
        self.free = mesh.interior

    def nonlinearity(self, u, p):
        q = quadrature_values(self.mesh, u)
        return load_vector(self.mesh, np.abs(q) ** (p - 1) * q), q

    def residual(self, u, p):
        N, q = self.nonlinearity(u, p)
        return self.K @ u - N, N, q

    def power_integral(self, u, p) -> float:
        """``int |u|^{p+1}``."""
        return integrate(self.mesh, np.abs(quadrature_values(self.mesh, u)) ** (p + 1))

    def dirichlet_energy(self, u) -> float:
        return float(u @ (self.K @ u))


@dataclass
class Solution:
    mesh: Mesh
    p: float
    values: np.ndarray
    residual_norm: float
    newton_iters: int
    energy: float
    mass: float
    nehari_gap: float
    peaks: tuple = ()

    @property
    def field(self) -> ScalarField:
        return ScalarField(self.mesh, self.values)

    @property
    def u_max_plus(self) -> float:
        return float(max(self.values.max(), 0.0))

    @property
    def u_max_minus(self) -> float:
        return float(max(-self.values.min(), 0.0))

    def to_json(self) -> dict:
        return {"mesh_digest": self.mesh.digest(), "p": self.p,
                "residual_norm": self.residual_norm, "newton_iters": self.newton_iters,
                "energy": self.energy, "mass": self.mass, "nehari_gap": self.nehari_gap,
                "peaks": [[list(map(float, c)), int(s)] for c, s in self.peaks],
                "values": [float(v) for v in self.values]}

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()) + "\n")

    @classmethod
    def from_json(cls, data: dict, mesh: Mesh) -> "Solution":
        if data["mesh_digest"] != mesh.digest():
            raise ValueError("solution was computed on a different mesh")
        return cls(mesh, float(data["p"]), np.asarray(data["values"], dtype=float),
                   float(data["residual_norm"]), int(data["newton_iters"]), float(data["energy"]),
                   float(data["mass"]), float(data["nehari_gap"]),
                   tuple((tuple(c), s) for c, s in data.get("peaks", [])))

    @classmethod
    def load(cls, path, mesh: Mesh) -> "Solution":
        return cls.from_json(json.loads(Path(path).read_text()), mesh)


# --------------------------------------------------------------------------
# seeds


def seed_guess(mesh: Mesh, p: float, peaks, check_overlap: bool = True) -> ScalarField:
    """Sum of truncated rescaled limit profiles centred at ``peaks``.

    ``peaks`` is a list of ``(point, sign)``; each bump is
    ``sign sqrt(e) max(0, 1 + U((x - a)/eps)/p)``.  Bumps closer than
    ``4 eps`` are rejected unless ``check_overlap`` is off (wide low-p seeds
    for warm starts overlap by design).
    """
    eps = seed_scale(p)
    centers = [np.asarray(c, dtype=float) for c, _ in peaks]
    for i in range(len(centers)):
        if mesh.domain.boundary_distance(centers[i][None])[0] <= 0:
            raise ValueError(f"peak {tuple(centers[i])} is not inside the domain")
        for j in range(i):
            if check_overlap and np.linalg.norm(centers[i] - centers[j]) < 4 * eps:
                raise ValueError("seed bumps overlap: peaks closer than 4 eps_seed "
                                 f"= {4 * eps:.3g}")
    u = np.zeros(mesh.n_vertices)
    for c, (_, sign) in zip(centers, peaks):
        z2 = ((mesh.vertices - c) ** 2).sum(1) / eps ** 2
        u += np.sign(sign) * SQRT_E * np.maximum(0.0, 1.0 + limit_profile(z2) / p)
    u[mesh.boundary] = 0.0
    return ScalarField(mesh, u)


def taper(mesh: Mesh, u: np.ndarray, width: float) -> np.ndarray:
    """Multiply by ``min(1, dist(x, boundary)/width)``."""
    d = mesh.domain.boundary_distance(mesh.vertices)
    out = np.asarray(u, dtype=float) * np.clip(d / width, 0.0, 1.0)
    out[mesh.boundary] = 0.0
    return out


def nehari_scale(problem: LaneEmdenProblem, u: np.ndarray, p: float) -> np.ndarray:
    """Scale the positive and negative parts separately onto the Nehari manifold."""
    out = np.array(u, dtype=float)
    for part in (out > 0, out < 0):
        if not part.any():
            continue
        v = np.where(part, out, 0.0)
        a = problem.dirichlet_energy(v)
        b = problem.power_integral(v, p)
        if a > 0 and b > 0:
            out[part] *= (a / b) ** (1.0 / (p - 1.0))
    return out


# --------------------------------------------------------------------------
# Newton


def newton_solve(problem: LaneEmdenProblem, p: float, init, rtol: float = 1e-10,
                 max_iter: int = 60, peaks=()) -> Solution:
    """Damped Newton iteration for the discrete Lane-Emden equations.

    Converged when the free residual is below ``rtol`` times the norm of the
    nonlinear load.  The Jacobian uses the weight ``p |u|^{p-1}``.
    """
    if not p > 1:
        raise ValueError("p must exceed 1")
    mesh, free = problem.mesh, problem.free
    u = np.array(init, dtype=float)
    u[mesh.boundary] = 0.0
    if not np.any(u):
        raise ValueError("initial guess is identically zero")
    growth = 0
    F, N, q = problem.residual(u, p)
    rn = np.linalg.norm(F[free])
    for it in range(max_iter + 1):
        scale = np.linalg.norm(N[free])
        if scale == 0.0 or np.abs(u).max() < 1e-8:
            raise NonConvergenceError(f"p={p:.4g}: iterate collapsed to the trivial solution", u, p)
        if rn <= rtol * scale:
            return _finish(problem, p, u, rn / scale, it, peaks)
        if it == max_iter:
            break
        J = (problem.K - weighted_mass(mesh, p * np.abs(q) ** (p - 1)))[free][:, free].tocsc()
        try:
            step = spla.splu(J).solve(-F[free])
        except RuntimeError as exc:
            raise NonConvergenceError(f"p={p:.4g}: singular Jacobian ({exc})", u, p) from exc
        d = np.zeros_like(u)
        d[free] = step
        if np.abs(step).max() < 1e-14 * max(np.abs(u).max(), 1.0):
            raise NonConvergenceError(f"p={p:.4g}: Newton stagnated (step below 1e-14)", u, p)
        t = 1.0
        while True:
            un = u + t * d
            Fn, Nn, qn = problem.residual(un, p)
            rnn = np.linalg.norm(Fn[free])
            if rnn < (1.0 - 1e-4 * t) * rn or t < 1e-4:
                break
            t *= 0.5
        growth = growth + 1 if rnn > rn else 0
        if growth >= 5:
            raise NonConvergenceError(f"p={p:.4g}: residual grew in 5 consecutive steps", un, p)
        if not np.isfinite(rnn):
            raise NonConvergenceError(f"p={p:.4g}: non-finite residual", u, p)
        u, F, N, q, rn = un, Fn, Nn, qn, rnn
    raise NonConvergenceError(f"p={p:.4g}: no convergence in {max_iter} iterations "
                              f"(relative residual {rn / max(scale, 1e-300):.2e})", u, p)


def _finish(problem, p, u, rel, iters, peaks) -> Solution:
    grad2 = problem.dirichlet_energy(u)
    pw = problem.power_integral(u, p)
    gap = abs(grad2 - pw) / pw
    J = 0.5 * grad2 - pw / (p + 1.0)
    return Solution(problem.mesh, float(p), u, float(rel), int(iters), float(J), float(p * pw),
                    float(gap), tuple(peaks))


@dataclass(frozen=True)
class EnergyReport:
    direct: float
    nehari: float
    rel_gap: float


def energy(sol: Solution, problem: LaneEmdenProblem | None = None) -> EnergyReport:
    """``J_p`` by both formulas: ``1/2 |grad u|^2 - |u|^{p+1}/(p+1)`` and
    ``(1/2 - 1/(p+1)) |u|^{p+1}``."""
    problem = problem or LaneEmdenProblem(sol.mesh)
    u, p = sol.values, sol.p
    pw = problem.power_integral(u, p)
    direct = 0.5 * problem.dirichlet_energy(u) - pw / (p + 1.0)
    nehari = (0.5 - 1.0 / (p + 1.0)) * pw
    scale = max(abs(direct), abs(nehari))
    gap = 0.0 if scale == 0.0 else abs(direct - nehari) / scale
    if gap > 1e-6:
        log.warning("energy formulas disagree by %.2e (relative)", gap)
    return EnergyReport(float(direct), float(nehari), float(gap))


# --------------------------------------------------------------------------
# continuation


@dataclass
class ContinuationPath:
    entries: list = field(default_factory=list)
    policy: dict = field(default_factory=dict)

    @property
    def ps(self) -> np.ndarray:
        return np.array([s.p for s in self.entries])

    def append(self, sol: Solution):
        if self.entries and not sol.p > self.entries[-1].p:
            raise ValueError("continuation parameters must increase strictly")
        self.entries.append(sol)

    def to_csv(self) -> str:
        lines = ["p,u_max_plus,u_max_minus,J_p,mass,x_plus,y_plus,x_minus,y_minus,"
                 "newton_iters,residual"]
        for s in self.entries:
            v = s.mesh.vertices
            ip, im = int(np.argmax(s.values)), int(np.argmin(s.values))
            lines.append(",".join(repr(float(x)) for x in (
                s.p, s.u_max_plus, s.u_max_minus, s.energy, s.mass,
                v[ip, 0], v[ip, 1], v[im, 0], v[im, 1])) + f",{s.newton_iters},{s.residual_norm!r}")
        return "\n".join(lines) + "\n"


def _core_predictor(problem, u, p_old, p_new, peaks, blend):
    """Replace each peak core by the limit profile at the predicted new height and width.

    The height follows ``u_max ~ sqrt(e)(1 - log p/p + D/p)`` with the deficit
    ``D`` frozen at its current value.
    """
    out = np.array(u, dtype=float)
    x = problem.mesh.vertices
    for c, sign in peaks:
        s = 1.0 if sign > 0 else -1.0
        r2 = ((x - np.asarray(c)) ** 2).sum(1)
        near = r2 < blend ** 2
        i = np.flatnonzero(near)[np.argmax(s * u[near])]
        a_old = abs(u[i])
        deficit = p_old * (a_old / SQRT_E - 1.0 + math.log(p_old) / p_old)
        a_new = SQRT_E * (1.0 - math.log(p_new) / p_new + deficit / p_new)
        e_old = (p_old * a_old ** (p_old - 1)) ** -0.5
        e_new = (p_new * a_new ** (p_new - 1)) ** -0.5
        r2c = ((x - x[i]) ** 2).sum(1)
        m_old = a_old * (1.0 + limit_profile(r2c / e_old ** 2) / p_old)
        m_new = a_new * (1.0 + limit_profile(r2c / e_new ** 2) / p_new)
        chi = np.clip(2.0 - np.sqrt(r2c) / blend, 0.0, 1.0)
        out += s * chi * (m_new - m_old)
    out[problem.mesh.boundary] = 0.0
    return out


def peak_scale(u, p) -> float:
    a = float(np.abs(u).max())
    return (p * a ** (p - 1)) ** -0.5


def initial_solution(problem: LaneEmdenProblem, p: float, peaks, taper_width: float | None = None,
                     rtol: float = 1e-10) -> Solution:
    """Tapered, Nehari-scaled seed followed by Newton."""
    width = taper_width or 0.25 * problem.mesh.domain.diameter
    u0 = taper(problem.mesh, seed_guess(problem.mesh, p, peaks, check_overlap=False).values, width)
    return newton_solve(problem, p, nehari_scale(problem, u0, p), rtol=rtol, peaks=peaks)


def continuation(problem: LaneEmdenProblem, p_start: float, p_end: float, peaks,
                 factor: float = 1.15, min_factor: float = 1.02, rtol: float = 1e-10,
                 warmup_from: float = 2.0, blend: float | None = None, callback=None,
                 start: Solution | None = None) -> ContinuationPath:
    """Warm-started path ``p_start -> p_end`` with geometric steps.

    If Newton does not converge from the seed at ``p_start``, an unrecorded
    warm-up path starting at ``warmup_from`` is run first.  Each step uses
    Nehari scaling as predictor while the peak is wider than ``blend / 50``
    and the core-rescaling predictor afterwards; a failed step is retried
    with the other predictor and then with a halved step.  A converged
    ``start`` solution replaces the seed (``p_start`` is then ignored).
    """
    if not p_start > 1 or not factor > 1:
        raise ValueError("need p_start > 1 and factor > 1")
    if p_end < p_start:
        raise ValueError("p_end must not be below p_start")
    blend = blend or 0.025 * problem.mesh.domain.diameter
    policy = {"factor": factor, "min_factor": min_factor, "rtol": rtol, "blend": blend,
              "warmup": None, "retries": []}
    path = ContinuationPath(policy=policy)
    try:
        if start is not None:
            if start.mesh is not problem.mesh:
                raise ValueError("start solution lives on a different mesh")
            sol = start
        else:
            sol = initial_solution(problem, p_start, peaks, rtol=rtol)
    except NonConvergenceError:
        if p_start <= warmup_from:
            raise
        log.info("seed failed at p=%.3g, warming up from p=%.3g", p_start, warmup_from)
        policy["warmup"] = warmup_from
        warm = continuation(problem, warmup_from, p_start, peaks, factor, min_factor, rtol,
                            warmup_from, blend)
        sol = warm.entries[-1]
    path.append(sol)
    if callback:
        callback(sol)
    f = factor
    while sol.p < p_end * (1 - 1e-12):
        p_new = min(p_end, sol.p * f)
        if p_end / p_new < 1.0 + 0.25 * (f - 1.0):
            p_new = p_end
        new = _step(problem, sol, p_new, peaks, rtol, blend)
        if new is None:
            policy["retries"].append(p_new)
            f = 1.0 + (f - 1.0) / 2.0
            if f < min_factor:
                raise PathTerminationError(f"continuation step underflow at p={sol.p:.4g}", path)
            continue
        sol = new
        path.append(sol)
        if callback:
            callback(sol)
        f = min(factor, 1.0 + 2.0 * (f - 1.0))
    return path


def _step(problem, sol, p_new, peaks, rtol, blend):
    narrow = peak_scale(sol.values, sol.p) < blend / 50.0
    predictors = ["core", "nehari"] if narrow else ["nehari"]
    for kind in predictors:
        if kind == "core":
            guess = _core_predictor(problem, sol.values, sol.p, p_new, peaks, blend)
        else:
            guess = nehari_scale(problem, sol.values, p_new)
        try:
            return newton_solve(problem, p_new, guess, rtol=rtol, peaks=peaks)
        except NonConvergenceError as exc:
            log.info("step to p=%.4g with %s predictor failed: %s", p_new, kind, exc)
    return None


# --------------------------------------------------------------------------
# meshes adapted to concentration


def concentration_mesh(domain: DomainSpec, h: float, centers, p_max: float,
                       radius: float | None = None, symmetric: bool | None = None,
                       n_outer: int | None = None) -> Mesh:
    """Mesh with graded patches at ``centers`` fine enough for peaks up to ``p_max``.

    ``n_outer`` points per ring default to ``1.92/h`` rounded to a multiple
    of 8 (96 at h = 0.02, at least 48), so that refining ``h`` also refines the peak profile.  Coarser
    rings leave the second-order energy term mesh-limited beyond p = 50.

    For two centres placed symmetrically about the domain centre the mesh is
    built point-symmetric and only the first patch is passed on.
    """
    core = min(0.05 * h, seed_scale(p_max) / 30.0)
    centers = [tuple(map(float, c)) for c in centers]
    if radius is None:
        bd = min(float(domain.boundary_distance(np.asarray(c)[None])[0]) for c in centers)
        radius = min(0.15 * domain.diameter / 2, bd - 3 * h)
        if len(centers) > 1:
            sep = min(np.linalg.norm(np.subtract(a, b)) for i, a in enumerate(centers)
                      for b in centers[:i])
            radius = min(radius, 0.4 * sep)
    if symmetric is None:
        symmetric = len(centers) == 2 and np.allclose(
            np.add(centers[0], centers[1]) / 2, domain.center, atol=1e-12)
    if n_outer is None:
        n_outer = max(48, 8 * int(round(0.24 / h)))
    use = centers[:1] if symmetric else centers
    patches = [GradedPatch(c, core, radius, n_outer) for c in use]
    return build_mesh(domain, h, patches, symmetric=symmetric)


# --------------------------------------------------------------------------
# radial shooting


@dataclass
class RadialSolution:
    p: float
    alpha: float
    node_radius: float
    radii: np.ndarray
    values: np.ndarray
    max_positive: float
    max_negative: float
    boundary_value: float

    def to_csv(self) -> str:
        head = f"# radial nodal solution p={self.p!r} alpha={self.alpha!r} node={self.node_radius!r}"
        rows = [head, "r,u"] + [f"{float(r)!r},{float(v)!r}" for r, v in zip(self.radii, self.values)]
        return "\n".join(rows) + "\n"

    def __call__(self, r):
        return np.interp(r, self.radii, self.values)


def _shoot(alpha: float, p: float, r_end: float = 1.0, rtol: float = 1e-11, dense: bool = False):
    """Integrate ``u'' + u'/r + |u|^{p-1}u = 0`` from ``u(0) = alpha`` in ``t = log r``.

    Returns the solve_ivp result; the state is ``(u, r u')``.
    """
    core = alpha ** (-(p - 1.0) / 2.0)  # natural length scale near the origin
    r0 = 1e-4 * min(core, 1.0)
    # series: u = alpha - alpha^p r^2 / 4
    ap = alpha ** p
    y0 = [alpha - ap * r0 ** 2 / 4.0, -ap * r0 ** 2 / 2.0]

    def rhs(t, y):
        r2 = math.exp(2.0 * t)
        return [y[1], -r2 * abs(y[0]) ** (p - 1.0) * y[0]]

    def zero(t, y):
        return y[0]

    zero.direction = 0
    # trial alphas far above the solution overflow; the caller sees non-finite states
    with np.errstate(over="ignore", invalid="ignore"):
        return solve_ivp(rhs, (math.log(r0), math.log(r_end)), y0, method="DOP853", rtol=rtol,
                         atol=1e-13, events=zero, dense_output=dense)


def _sign_changes(alpha, p):
    sol = _shoot(alpha, p)
    if not sol.success or not np.all(np.isfinite(sol.y[:, -1])):
        return 2, sol
    return len(sol.t_events[0]), sol


def solve_radial_nodal(p: float, tol: float = 1e-10, alpha_range=None) -> RadialSolution:
    """Radial solution on the unit disk with one interior sign change.

    Bisection on ``alpha = u(0)`` between a value with exactly one sign
    change on ``(0, 1]`` and one with two.  The default scan range covers
    ``alpha^{p-1} ~ j_{0,2}^2``, the linear limit as ``p -> 1``.
    """
    if not p > 1:
        raise ValueError("p must exceed 1")
    if alpha_range is None:
        lin = 30.4713 ** (1.0 / (p - 1.0))
        alpha_range = (min(1e-3, lin / 1e3), max(1e3, lin * 1e3))
    decades = math.log10(alpha_range[1] / alpha_range[0])
    lo, hi = None, None
    for a in np.geomspace(alpha_range[0], alpha_range[1], int(10 * decades) + 1):
        n, _ = _sign_changes(a, p)
        if n == 1:
            lo = a
        if n >= 2 and lo is not None:
            hi = a
            break
    if lo is None or hi is None:
        raise SolverError(f"could not bracket the one-node solution for alpha in "
                          f"[{alpha_range[0]:g}, {alpha_range[1]:g}]")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        n, sol = _sign_changes(mid, p)
        if n >= 2:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-15 * hi:
            break
    alpha = lo
    sol = _shoot(alpha, p, dense=True)
    u1 = float(sol.y[0, -1])
    if abs(u1) > tol:
        # fall back to a secant refinement on u(1)
        a0, a1 = lo, hi
        f0, f1 = u1, float(_shoot(hi, p).y[0, -1])
        for _ in range(50):
            if f1 == f0 or not np.isfinite(f1):
                break
            a2 = a1 - f1 * (a1 - a0) / (f1 - f0)
            f2 = float(_shoot(a2, p).y[0, -1])
            a0, f0, a1, f1 = a1, f1, a2, f2
            if abs(f2) <= tol:
                break
        if np.isfinite(f1) and abs(f1) < abs(u1):
            alpha = a1
            sol = _shoot(alpha, p, dense=True)
            u1 = float(sol.y[0, -1])
        # for p near 1 alpha is huge and only relative accuracy is meaningful
        if abs(u1) > tol * max(1.0, alpha):
            raise SolverError(f"shooting reached |u(1)| = {abs(u1):.2e} with alpha = {alpha:.3g}")
    nodes = np.exp(sol.t_events[0])
    interior = nodes[nodes < 1.0 - 1e-9]
    if len(interior) != 1:
        raise SolverError(f"expected one interior sign change, found {len(interior)}")
    node = float(interior[0])
    r = np.concatenate([[0.0], np.geomspace(math.exp(sol.t[0]), 1.0, 4000)])
    vals = np.concatenate([[alpha], sol.sol(np.log(r[1:]))[0]])
    vals[-1] = u1
    # extremum of the negative part where r u' vanishes beyond the node
    ts = np.linspace(math.log(node), 0.0, 20001)
    neg = -sol.sol(ts)[0].min()
    return RadialSolution(float(p), float(alpha), node, r, vals, float(alpha), float(neg), u1)
