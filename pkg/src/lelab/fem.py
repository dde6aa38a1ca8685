"""P1 finite elements: assembly, Dirichlet solves, interpolation and
quadrature of nonlinear integrands."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import Mesh, MeshError

log = logging.getLogger(__name__)

# Strang-Fix degree-6 rule on the reference triangle (12 points), barycentric
_A, _B = 0.063089014491502, 0.249286745170910
_C, _D, _E = 0.053145049844817, 0.310352451033784, 0.636502499121399
_QP = np.array(
    [[_A, _A, 1 - 2 * _A], [_A, 1 - 2 * _A, _A], [1 - 2 * _A, _A, _A],
     [_B, _B, 1 - 2 * _B], [_B, 1 - 2 * _B, _B], [1 - 2 * _B, _B, _B],
     [_C, _D, _E], [_C, _E, _D], [_D, _C, _E], [_D, _E, _C], [_E, _C, _D], [_E, _D, _C]]
)
_QW = np.array([0.050844906370207] * 3 + [0.116786275726379] * 3 + [0.082851075618374] * 6)


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Vertex values of a P1 function on ``mesh``."""

    mesh: Mesh
    values: np.ndarray

    def __call__(self, point) -> float:
        return interpolate(self, point)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


def assemble(mesh: Mesh) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Stiffness and consistent mass matrices (unconstrained)."""
    v = mesh.vertices
    t = mesh.triangles
    signed = _signed_areas(v, t)
    # graded patches hold triangles of absolute area ~1e-22, so degeneracy is
    # judged relative to the squared longest edge
    p = v[t]
    longest = np.max([((p[:, i] - p[:, (i + 1) % 3]) ** 2).sum(-1) for i in range(3)], axis=0)
    rel = signed / longest
    if rel.min() < 1e-14:
        bad = int(np.argmin(rel))
        raise MeshError(f"degenerate triangle {bad} with area {signed[bad]:.3e} "
                        f"at {v[t[bad]].mean(axis=0)}")
    grads = p1_gradients(mesh)  # (m, 3, 2)
    area = signed
    ke = np.einsum("mid,mjd->mij", grads, grads) * area[:, None, None]
    me = (np.ones((3, 3)) + np.eye(3))[None] * (area / 12.0)[:, None, None]
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.n_vertices
    K = sp.csr_matrix((ke.ravel(), (rows, cols)), shape=(n, n))
    M = sp.csr_matrix((me.ravel(), (rows, cols)), shape=(n, n))
    K.sum_duplicates()
    M.sum_duplicates()
    return K, M


def p1_gradients(mesh: Mesh) -> np.ndarray:
    """Gradients of the three hat functions on every triangle, shape (m, 3, 2)."""
    p = mesh.vertices[mesh.triangles]
    # edge opposite to each vertex, rotated by 90 degrees, over twice the area
    e0 = p[:, 2] - p[:, 1]
    e1 = p[:, 0] - p[:, 2]
    e2 = p[:, 1] - p[:, 0]
    twice_area = e2[:, 0] * (-e1[:, 1]) - e2[:, 1] * (-e1[:, 0])
    g = np.stack([e0, e1, e2], axis=1)
    g = np.stack([-g[..., 1], g[..., 0]], axis=-1)
    return g / twice_area[:, None, None]


def _signed_areas(v, t):
    d1 = v[t[:, 1]] - v[t[:, 0]]
    d2 = v[t[:, 2]] - v[t[:, 0]]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


class DirichletSolver:
    """Factorization of the stiffness matrix restricted to interior vertices.

    ``method="direct"`` uses a sparse LU factorization of the SPD block,
    ``method="cg"`` uses Jacobi-preconditioned conjugate gradients.
    """

    def __init__(self, mesh: Mesh, K=None, M=None, method: str = "direct",
                 rtol: float = 1e-12, maxiter: int = 20000):
        if K is None or M is None:
            K, M = assemble(mesh)
        self.mesh, self.K, self.M = mesh, K, M
        self.free = mesh.interior
        self.fixed = np.flatnonzero(mesh.boundary)
        self.K_ff = K[self.free][:, self.free].tocsc()
        self.K_fb = K[self.free][:, self.fixed].tocsr()
        self.method, self.rtol, self.maxiter = method, rtol, maxiter
        self._lu = spla.splu(self.K_ff, permc_spec="MMD_AT_PLUS_A") if method == "direct" else None

    def solve_free(self, b: np.ndarray) -> np.ndarray:
        """Solve ``K_ff x = b`` to relative residual ``rtol``."""
        bnorm = np.linalg.norm(b)
        if bnorm == 0.0:
            return np.zeros_like(b)
        if self._lu is not None:
            x = self._lu.solve(b)
            for _ in range(3):
                r = b - self.K_ff @ x
                if np.linalg.norm(r) <= self.rtol * bnorm:
                    return x
                x += self._lu.solve(r)
            r = b - self.K_ff @ x
            if np.linalg.norm(r) <= self.rtol * bnorm:
                return x
            log.warning("direct solve residual %.2e above tolerance, switching to CG",
                        np.linalg.norm(r) / bnorm)
            return self._cg(b, x)
        return self._cg(b, None)

    def _cg(self, b, x0):
        d = self.K_ff.diagonal()
        pre = spla.LinearOperator(self.K_ff.shape, matvec=lambda x: x / d)
        x, info = spla.cg(self.K_ff, b, x0=x0, rtol=self.rtol, atol=0.0,
                          maxiter=self.maxiter, M=pre)
        if info != 0:
            raise SolverError(f"conjugate gradients did not converge in {self.maxiter} "
                              "iterations; the operator may be indefinite or broken")
        return x

    def solve(self, load: np.ndarray, boundary_values: np.ndarray | None = None) -> np.ndarray:
        """Solve ``K u = load`` with ``u = boundary_values`` on the boundary."""
        n = self.mesh.n_vertices
        u = np.zeros(n)
        b = np.asarray(load, dtype=float)[self.free].copy()
        if boundary_values is not None:
            g = np.asarray(boundary_values, dtype=float)[self.fixed]
            u[self.fixed] = g
            b -= self.K_fb @ g
        u[self.free] = self.solve_free(b)
        return u


def solve_dirichlet(mesh: Mesh, rhs, boundary_values=None, solver: DirichletSolver | None = None
                    ) -> ScalarField:
    """Weak solution of ``-lap u = rhs`` with Dirichlet data ``boundary_values``."""
    solver = solver or DirichletSolver(mesh)
    f = np.asarray(rhs, dtype=float)
    g = None if boundary_values is None else np.asarray(boundary_values, dtype=float)
    return ScalarField(mesh, solver.solve(solver.M @ f, g))


def interpolate(field: ScalarField, point) -> float:
    k, lam = field.mesh.locate(point)
    return float(lam @ np.asarray(field.values)[field.mesh.triangles[k]])


def interpolate_many(mesh: Mesh, values, points, outside: float | None = None) -> np.ndarray:
    """P1 interpolant at ``points``; points off the mesh get ``outside`` when given."""
    values = np.asarray(values)
    out = np.empty(len(points))
    for i, pt in enumerate(np.asarray(points, dtype=float)):
        try:
            k, lam = mesh.locate(pt)
        except MeshError:
            if outside is None:
                raise
            out[i] = outside
            continue
        out[i] = lam @ values[mesh.triangles[k]]
    return out


def recovered_gradient(mesh: Mesh, values) -> np.ndarray:
    """Vertex gradients by area-weighted averaging of element gradients."""
    g = np.einsum("mi,mid->md", np.asarray(values)[mesh.triangles], p1_gradients(mesh))
    w = mesh.areas
    acc = np.zeros((mesh.n_vertices, 2))
    wsum = np.zeros(mesh.n_vertices)
    for j in range(3):
        np.add.at(acc, mesh.triangles[:, j], g * w[:, None])
        np.add.at(wsum, mesh.triangles[:, j], w)
    return acc / wsum[:, None]


def interpolate_gradient(mesh: Mesh, nodal_grad: np.ndarray, points) -> np.ndarray:
    out = np.empty((len(points), 2))
    for i, pt in enumerate(np.asarray(points, dtype=float)):
        k, lam = mesh.locate(pt)
        out[i] = lam @ nodal_grad[mesh.triangles[k]]
    return out


# --------------------------------------------------------------------------
# quadrature of nonlinear integrands


def quadrature_values(mesh: Mesh, values) -> np.ndarray:
    """P1 function at the quadrature points, shape (m, nq)."""
    return np.asarray(values)[mesh.triangles] @ _QP.T


def quadrature_points(mesh: Mesh) -> np.ndarray:
    return np.einsum("qi,mid->mqd", _QP, mesh.vertices[mesh.triangles])


def integrate(mesh: Mesh, qvalues: np.ndarray, mask=None) -> float:
    """Integral of a function given at quadrature points."""
    per_tri = (qvalues @ _QW) * mesh.areas
    if mask is not None:
        per_tri = per_tri[mask]
    return float(per_tri.sum())


def load_vector(mesh: Mesh, qvalues: np.ndarray) -> np.ndarray:
    """Vector of ``int f phi_i`` for ``f`` given at quadrature points."""
    local = np.einsum("mq,q,qi->mi", qvalues, _QW, _QP) * mesh.areas[:, None]
    return np.bincount(mesh.triangles.ravel(), weights=local.ravel(), minlength=mesh.n_vertices)


def weighted_mass(mesh: Mesh, qweight: np.ndarray) -> sp.csr_matrix:
    """Matrix of ``int w phi_i phi_j`` for ``w`` given at quadrature points."""
    local = np.einsum("mq,q,qi,qj->mij", qweight, _QW, _QP, _QP) * mesh.areas[:, None, None]
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.n_vertices
    W = sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))
    W.sum_duplicates()
    return W
