"""Dirichlet Green function, Robin function and the two-point Kirchhoff-Routh
function ``Psi(a1, a2) = 2 G(a1, a2) - R(a1) - R(a2)``.

``G(x, y) = -(1/2pi) log|x - y| + H(x, y)`` with ``H`` harmonic and ``G = 0`` on
the boundary; ``R(x) = H(x, x)``.  Three evaluation modes exist:

* ``analytic-disk``: images, ``H(x, y) = (1/4pi) log(1 - 2 x.y + |x|^2 |y|^2)``.
* ``analytic-rectangle``: doubly periodic images through the Jacobi theta
  function ``theta_1`` (lattice spanned by ``2 width`` and ``2i height``).
* ``numeric``: for each source ``x`` the harmonic function with boundary data
  ``(1/2pi) log|x - .|`` is computed by finite elements; it is evaluated at
  ``y`` through Green's representation formula on the mesh boundary, which
  keeps ``H`` smooth in both arguments (plain P1 interpolation would not).
"""

from __future__ import annotations

import json
import logging
import math
import threading
from dataclasses import dataclass, field

import numpy as np

from .fem import DirichletSolver, assemble
from .mesh import DomainSpec, Mesh, build_mesh

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
CLASS_TOL = 1e-6


class GreenError(ValueError):
    """Singular or out-of-range arguments."""


class BoundaryEscapeError(GreenError):
    """A critical-point iterate left the safeguard region."""


# --------------------------------------------------------------------------
# closed forms on the unit disk


def regular_disk(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return math.log(1.0 - 2.0 * float(x @ y) + float(x @ x) * float(y @ y)) / (2.0 * TWO_PI)


def robin_disk(x) -> float:
    x = np.asarray(x, dtype=float)
    return math.log(1.0 - float(x @ x)) / TWO_PI


def green_disk(x, y) -> float:
    """Green function of the unit disk by the method of images."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = math.hypot(*(x - y))
    if d < 1e-12:
        raise GreenError(f"singular pair: |x - y| = {d:.1e}")
    return -math.log(d) / TWO_PI + regular_disk(x, y)


def disk_green_gradient(x, y) -> np.ndarray:
    """Gradient of ``G(x, .)`` at ``y`` on the unit disk."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = y - x
    D = 1.0 - 2.0 * float(x @ y) + float(x @ x) * float(y @ y)
    return -d / (TWO_PI * float(d @ d)) + (-2.0 * x + 2.0 * float(x @ x) * y) / (2.0 * TWO_PI * D)


def disk_psi_gradient(a1, a2) -> np.ndarray:
    """Closed-form gradient of ``Psi`` on the disk, ordered (a1x, a1y, a2x, a2y)."""
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    g1 = 2.0 * disk_green_gradient(a2, a1) + 2.0 * a1 / (TWO_PI * (1.0 - a1 @ a1))
    g2 = 2.0 * disk_green_gradient(a1, a2) + 2.0 * a2 / (TWO_PI * (1.0 - a2 @ a2))
    return np.concatenate([g1, g2])


def antipodal_psi(r: float) -> float:
    """``Psi((r,0), (-r,0))`` on the unit disk."""
    return math.log((1.0 + r * r) / (2.0 * r * (1.0 - r * r))) / math.pi


R_STAR = math.sqrt(math.sqrt(5.0) - 2.0)


# --------------------------------------------------------------------------
# closed form on rectangles


def _theta1_over(v: np.ndarray, q: float, nterms: int) -> np.ndarray:
    """``theta_1(v) / v`` for complex ``v`` (finite at ``v = 0``)."""
    out = np.zeros(np.shape(v), dtype=complex)
    for n in range(nterms):
        k = 2 * n + 1
        # sin(k v)/v = k sinc(k v / pi)
        out += (-1) ** n * q ** ((n + 0.5) ** 2) * k * np.sinc(k * v / math.pi)
    return 2.0 * out


class _RectangleKernel:
    def __init__(self, width: float, height: float):
        self.a, self.b = float(width), float(height)
        self.q = math.exp(-math.pi * self.b / self.a)
        # truncation: q^((n+1/2)^2) e^{(2n+1) pi b/a} decays like q^(n^2 - 3/4)
        self.nterms = 3
        while self.q ** (self.nterms ** 2 - 2 * self.nterms) > 1e-18:
            self.nterms += 1
        self.nterms += 2

    def _log_theta(self, zeta):
        v = math.pi * zeta / (2.0 * self.a)
        return np.log(np.abs(_theta1_over(v, self.q, self.nterms))) + np.log(np.abs(v))

    def regular(self, x, y) -> float:
        z = complex(*x)
        w = complex(*y)
        v = math.pi * (z - w) / (2.0 * self.a)
        near = math.log(abs(_theta1_over(np.array(v), self.q, self.nterms))) + math.log(math.pi / (2 * self.a))
        rest = (self._log_theta(np.array(z + w)) - self._log_theta(np.array(z - w.conjugate()))
                - self._log_theta(np.array(z + w.conjugate())))
        return float(-(near + rest) / TWO_PI)


# --------------------------------------------------------------------------
# evaluator


@dataclass
class _SourceData:
    flux: np.ndarray  # boundary flux of the harmonic correction, per boundary vertex


class GreenEvaluator:
    """Evaluates ``G``, ``H`` and ``R`` on one domain.

    ``mode`` is ``"auto"`` (closed form when available), ``"analytic-disk"``,
    ``"analytic-rectangle"`` or ``"numeric"``.  Numeric mode needs a mesh or a
    target edge length ``h``.  The numeric source cache is guarded by a lock,
    so one evaluator may serve several threads.
    """

    def __init__(self, domain: DomainSpec, mode: str = "auto", mesh: Mesh | None = None,
                 h: float | None = None):
        if mode == "auto":
            mode = {"disk": "analytic-disk", "rectangle": "analytic-rectangle"}.get(domain.kind, "numeric")
        if mode == "analytic-disk" and domain.kind != "disk":
            raise GreenError("analytic-disk mode needs the unit disk")
        if mode == "analytic-rectangle" and domain.kind != "rectangle":
            raise GreenError("analytic-rectangle mode needs a rectangle")
        if mode not in ("analytic-disk", "analytic-rectangle", "numeric"):
            raise GreenError(f"unknown mode {mode!r}")
        self.domain, self.mode = domain, mode
        self._rect = _RectangleKernel(domain.width, domain.height) if mode == "analytic-rectangle" else None
        self.mesh = None
        if mode == "numeric":
            if mesh is None:
                if h is None:
                    raise GreenError("numeric mode needs a mesh or h")
                mesh = build_mesh(domain, h)
            self.mesh = mesh
            self._setup_numeric()
        self._cache: dict[tuple[int, int], _SourceData] = {}
        self._lock = threading.Lock()

    @property
    def analytic(self) -> bool:
        return self.mode != "numeric"

    @property
    def h(self) -> float:
        return self.mesh.h if self.mesh is not None else 0.0

    # -- numeric internals

    def _setup_numeric(self):
        m = self.mesh
        K, M = assemble(m)
        self._K = K.tocsr()
        self._solver = DirichletSolver(m, K, M)
        self._bidx = np.flatnonzero(m.boundary)
        # boundary edges are directed edges of the positively oriented triangles
        # whose reverse is absent; the outward normal is the tangent turned clockwise
        t = m.triangles
        directed = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        n = m.n_vertices
        code = directed[:, 0].astype(np.int64) * n + directed[:, 1]
        rev = directed[:, 1].astype(np.int64) * n + directed[:, 0]
        bedges = directed[~np.isin(code, rev)]
        p0, p1 = m.vertices[bedges[:, 0]], m.vertices[bedges[:, 1]]
        tang = p1 - p0
        length = np.hypot(tang[:, 0], tang[:, 1])
        normal = np.stack([tang[:, 1], -tang[:, 0]], axis=1) / length[:, None]
        gx, gw = np.polynomial.legendre.leggauss(8)
        s = 0.5 * (gx + 1.0)
        self._qpts = (p0[:, None, :] + s[None, :, None] * tang[:, None, :]).reshape(-1, 2)
        self._qw = (0.5 * gw[None, :] * length[:, None]).ravel()
        self._qn = np.repeat(normal, len(gx), axis=0)

    def _source(self, x) -> _SourceData:
        key = (int(round(x[0] * 1e10)), int(round(x[1] * 1e10)))
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        m = self.mesh
        bd = float(self.domain.boundary_distance(np.asarray(x)[None])[0])
        if bd < 2 * m.h:
            raise GreenError(f"source {tuple(x)} lies {bd:.3g} from the boundary, below 2h = {2 * m.h:.3g}; "
                             "numeric Green values there are not accurate")
        g = np.zeros(m.n_vertices)
        d = m.vertices[self._bidx] - np.asarray(x)
        g[self._bidx] = np.log(np.hypot(d[:, 0], d[:, 1])) / TWO_PI
        v = self._solver.solve(np.zeros(m.n_vertices), g)
        flux = (self._K @ v)[self._bidx]
        data = _SourceData(flux)
        with self._lock:
            self._cache[key] = data
        return data

    def _numeric_regular(self, x, y) -> float:
        data = self._source(x)
        y = np.asarray(y, dtype=float)
        m = self.mesh
        db = m.vertices[self._bidx] - y
        gamma_b = -np.log(np.hypot(db[:, 0], db[:, 1])) / TWO_PI
        dq = self._qpts - y
        r2 = (dq ** 2).sum(1)
        dgamma = -(dq * self._qn).sum(1) / (TWO_PI * r2)
        dx = self._qpts - np.asarray(x, dtype=float)
        gx = np.log(np.hypot(dx[:, 0], dx[:, 1])) / TWO_PI
        return float(gamma_b @ data.flux - (gx * dgamma) @ self._qw)

    # -- public evaluations

    def _check_interior(self, *pts):
        for pt in pts:
            if not self.domain.contains(np.asarray(pt, dtype=float)[None])[0]:
                raise GreenError(f"point {tuple(pt)} is not inside the domain")

    def regular(self, x, y) -> float:
        self._check_interior(x, y)
        if self.mode == "analytic-disk":
            return regular_disk(x, y)
        if self.mode == "analytic-rectangle":
            return self._rect.regular(x, y)
        return self._numeric_regular(x, y)

    def robin(self, x) -> float:
        return self.regular(x, x)

    def green(self, x, y) -> float:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        d = math.hypot(*(x - y))
        if d < 1e-12:
            raise GreenError(f"singular pair: |x - y| = {d:.1e}")
        if self.mode == "numeric" and d < 2 * self.h:
            raise GreenError(f"pair separation {d:.3g} is below 2h = {2 * self.h:.3g}")
        return -math.log(d) / TWO_PI + self.regular(x, y)

    def green_gradient(self, x, y, step: float | None = None) -> np.ndarray:
        """Gradient of ``G(x, .)`` at ``y``."""
        if self.mode == "analytic-disk":
            return disk_green_gradient(x, y)
        s = step or 1e-5 * self.domain.diameter
        y = np.asarray(y, dtype=float)
        e = np.eye(2) * s
        return np.array([(self.green(x, y + e[k]) - self.green(x, y - e[k])) / (2 * s) for k in range(2)])

    def psi_parts(self, a1, a2) -> tuple[float, float, float]:
        g = self.green(a1, a2)
        r1, r2 = self.robin(a1), self.robin(a2)
        return g - r1, g - r2, g

    def psi(self, a1, a2) -> float:
        p1, p2, _ = self.psi_parts(a1, a2)
        return p1 + p2

    def psi_flat(self, z) -> float:
        return self.psi(z[:2], z[2:])

    def clear_cache(self):
        with self._lock:
            self._cache.clear()


# --------------------------------------------------------------------------
# Kirchhoff-Routh report


@dataclass
class KirchhoffRouthReport:
    pair: tuple[tuple[float, float], tuple[float, float]]
    psi: float
    psi1: float
    psi2: float
    green: float
    robin: tuple[float, float]
    regular: float = 0.0
    grad: np.ndarray | None = None
    hessian: np.ndarray | None = None
    w_matrix: np.ndarray | None = None
    det_w: float | None = None

    def to_dict(self) -> dict:
        out = {"pair": [list(self.pair[0]), list(self.pair[1])], "psi": self.psi,
               "psi1": self.psi1, "psi2": self.psi2, "G": self.green,
               "H": self.regular, "R": list(self.robin)}
        if self.grad is not None:
            out["grad"] = [float(v) for v in self.grad]
            out["hessian"] = [float(v) for v in np.ravel(self.hessian)]
            out["w_matrix"] = [float(v) for v in np.ravel(self.w_matrix)]
            out["det_w"] = float(self.det_w)
        return out

    def to_text(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def kirchhoff_routh(ev: GreenEvaluator, a1, a2, derivatives: bool = False) -> KirchhoffRouthReport:
    a1 = tuple(float(v) for v in a1)
    a2 = tuple(float(v) for v in a2)
    g = ev.green(a1, a2)
    r1, r2 = ev.robin(a1), ev.robin(a2)
    rep = KirchhoffRouthReport((a1, a2), (g - r1) + (g - r2), g - r1, g - r2, g, (r1, r2),
                               ev.regular(a1, a2))
    if derivatives:
        grad, hess = grad_hess_psi(ev, a1, a2)
        W, det = w_from_hessian(hess)
        rep.grad, rep.hessian, rep.w_matrix, rep.det_w = grad, hess, W, det
    return rep


def fd_step(ev: GreenEvaluator) -> float:
    return 1e-4 * ev.domain.diameter


def grad_hess_psi(ev: GreenEvaluator, a1, a2, step: float | None = None):
    """Gradient and Hessian of ``Psi`` in (a1x, a1y, a2x, a2y).

    Central differences at steps ``s`` and ``2s`` combined by one Richardson
    level.
    """
    s = step or fd_step(ev)
    z0 = np.concatenate([np.asarray(a1, dtype=float), np.asarray(a2, dtype=float)])
    bd = ev.domain.boundary_distance(z0.reshape(2, 2))
    if bd.min() < 10 * 2 * s:
        raise GreenError(f"pair within {bd.min():.3g} of the boundary; finite differences need "
                         f"at least {20 * s:.3g}")
    f = ev.psi_flat
    f0 = f(z0)
    vals = {}

    def F(*offsets):
        key = tuple(offsets)
        if key not in vals:
            z = z0.copy()
            for k, c in offsets:
                z[k] += c
            vals[key] = f(z)
        return vals[key]

    grad = np.empty(4)
    hess = np.empty((4, 4))
    for k in range(4):
        d1 = (F((k, s)) - F((k, -s))) / (2 * s)
        d2 = (F((k, 2 * s)) - F((k, -2 * s))) / (4 * s)
        grad[k] = (4 * d1 - d2) / 3
        h1 = (F((k, s)) - 2 * f0 + F((k, -s))) / s ** 2
        h2 = (F((k, 2 * s)) - 2 * f0 + F((k, -2 * s))) / (4 * s ** 2)
        hess[k, k] = (4 * h1 - h2) / 3
    for k in range(4):
        for j in range(k + 1, 4):
            def mixed(t):
                return (F((k, t), (j, t)) - F((k, t), (j, -t)) - F((k, -t), (j, t))
                        + F((k, -t), (j, -t))) / (4 * t * t)
            hess[k, j] = hess[j, k] = (4 * mixed(s) - mixed(2 * s)) / 3
    return grad, hess


def w_from_hessian(hess: np.ndarray) -> tuple[np.ndarray, float]:
    """Non-degeneracy matrix: Hessian with both off-diagonal 2x2 blocks negated."""
    W = np.array(hess, dtype=float, copy=True)
    W[:2, 2:] *= -1.0
    W[2:, :2] *= -1.0
    return W, lu_det(W)


def lu_det(A: np.ndarray) -> float:
    """Determinant by LU factorization with partial pivoting."""
    import scipy.linalg as sla

    lu, piv = sla.lu_factor(A)
    sign = (-1.0) ** int(np.sum(piv != np.arange(len(piv))))
    return float(sign * np.prod(np.diag(lu)))


def w_matrix(ev: GreenEvaluator, x, y) -> tuple[np.ndarray, float]:
    _, hess = grad_hess_psi(ev, x, y)
    return w_from_hessian(hess)


# --------------------------------------------------------------------------
# critical points


@dataclass
class CriticalPoint:
    pair: tuple[tuple[float, float], tuple[float, float]]
    psi_value: float
    grad_norm: float
    classification: str
    iterations: int
    hessian_eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def to_dict(self) -> dict:
        return {"pair": [list(self.pair[0]), list(self.pair[1])], "psi": self.psi_value,
                "grad_norm": self.grad_norm, "classification": self.classification,
                "iterations": self.iterations,
                "hessian_eigenvalues": [float(v) for v in self.hessian_eigenvalues]}


def classify(eigs: np.ndarray, tol: float = CLASS_TOL) -> str:
    """Inertia-based label.  Zero modes (e.g. rotations on the disk) do not spoil
    a minimum or maximum; all-zero spectra are degenerate."""
    if np.all(np.abs(eigs) <= tol):
        return "degenerate"
    if np.all(eigs >= -tol):
        return "min"
    if np.all(eigs <= tol):
        return "max"
    return "saddle"


def find_critical_point(ev: GreenEvaluator, init, mode: str = "minimize", tol: float | None = None,
                        max_iter: int = 2000) -> CriticalPoint:
    """Critical point of ``Psi`` starting from ``init = (a1, a2)``.

    ``minimize`` runs damped gradient descent with Armijo backtracking and
    finishes with Newton steps on the gradient; ``newton`` goes straight to the
    Newton phase.  Iterates must keep separation and boundary distance at least
    ``0.01 diam``; leaving that region raises :class:`BoundaryEscapeError`.
    """
    if mode not in ("minimize", "newton"):
        raise ValueError("mode must be 'minimize' or 'newton'")
    tol = tol if tol is not None else (1e-6 if ev.analytic else 1e-4)
    delta = 0.01 * ev.domain.diameter
    z = np.concatenate([np.asarray(init[0], dtype=float), np.asarray(init[1], dtype=float)])
    _guard(ev, z, delta)
    f = ev.psi_flat
    it = 0
    grad, hess = grad_hess_psi(ev, z[:2], z[2:])
    fz = f(z)
    if mode == "minimize":
        t = 0.1
        while np.linalg.norm(grad) > max(tol, 1e-3) and it < max_iter:
            it += 1
            gnorm2 = float(grad @ grad)
            t = min(1.0, 2.0 * t)
            while True:
                zn = z - t * grad
                ok = _inside(ev, zn, delta)
                if ok:
                    fn = f(zn)
                    if fn <= fz - 1e-4 * t * gnorm2:
                        break
                t *= 0.5
                if t < 1e-14:
                    raise BoundaryEscapeError(f"line search stalled at pair {z.tolist()}")
            z, fz = zn, fn
            grad, hess = grad_hess_psi(ev, z[:2], z[2:])
    while np.linalg.norm(grad) > tol and it < max_iter:
        it += 1
        # least squares handles the rotational zero mode on the disk
        dz = np.linalg.lstsq(hess, -grad, rcond=1e-10)[0]
        t = 1.0
        g0 = np.linalg.norm(grad)
        while True:
            zn = z + t * dz
            if _inside(ev, zn, delta):
                gn, hn = grad_hess_psi(ev, zn[:2], zn[2:])
                if np.linalg.norm(gn) < (1 - 1e-4 * t) * g0:
                    break
            t *= 0.5
            if t < 1e-10:
                raise BoundaryEscapeError(f"Newton polish failed near {z.tolist()} "
                                          f"(gradient norm {g0:.2e})")
        z, grad, hess = zn, gn, hn
    _guard(ev, z, delta)
    gnorm = float(np.linalg.norm(grad))
    if gnorm > tol:
        raise GreenError(f"no convergence in {max_iter} iterations (gradient norm {gnorm:.2e})")
    if ev.domain.kind == "disk":
        z, grad, hess = _disk_representative(ev, z)
        gnorm = float(np.linalg.norm(grad))
    eigs = np.linalg.eigvalsh(0.5 * (hess + hess.T))
    pair = (tuple(z[:2].tolist()), tuple(z[2:].tolist()))
    return CriticalPoint(pair, float(f(z)), gnorm, classify(eigs), it, eigs)


def _disk_representative(ev, z):
    # rotate so that a1 sits on the positive x-axis
    ang = -math.atan2(z[1], z[0])
    c, s = math.cos(ang), math.sin(ang)
    Q = np.array([[c, -s], [s, c]])
    z = np.concatenate([Q @ z[:2], Q @ z[2:]])
    z[1] = 0.0
    g, h = grad_hess_psi(ev, z[:2], z[2:])
    return z, g, h


def _inside(ev, z, delta) -> bool:
    pts = z.reshape(2, 2)
    if np.linalg.norm(pts[0] - pts[1]) < delta:
        return False
    return bool(np.all(ev.domain.boundary_distance(pts) >= delta))


def _guard(ev, z, delta):
    if not _inside(ev, z, delta):
        raise BoundaryEscapeError(f"pair {z.tolist()} violates the safeguard region "
                                  f"(separation and boundary distance >= {delta:.3g})")


# --------------------------------------------------------------------------
# symmetry sampling


def sample_pairs(domain: DomainSpec, n: int, rng: np.random.Generator, margin: float = 0.1,
                 min_sep: float = 0.05) -> list[tuple[np.ndarray, np.ndarray]]:
    """Random interior pairs with boundary distance >= margin and separation >= min_sep."""
    out = []
    lo = domain.center - domain.diameter / 2
    while len(out) < n:
        pts = lo + rng.random((2, 2)) * domain.diameter
        if np.all(domain.boundary_distance(pts) >= margin) and np.linalg.norm(pts[0] - pts[1]) >= min_sep:
            out.append((pts[0], pts[1]))
    return out
