"""Entire-space limit objects of the rescaled Lane-Emden peaks.

``U(z) = log 1/(1 + |z|^2/8)^2`` solves ``-lap U = e^U`` in the plane.  Around
it live the bounded kernel of the linearized operator, the radial first-order
correction ``w0`` and the integral constants that enter the sharp peak and
energy expansions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate


class QuadratureError(RuntimeError):
    pass


class RefinementError(RuntimeError):
    pass


def u_profile(z, with_exp: bool = False):
    """Limit profile ``U`` at points ``z`` of shape (..., 2)."""
    z = np.asarray(z, dtype=float)
    return u_radial(np.sqrt((z ** 2).sum(-1)), with_exp)


def u_radial(r, with_exp: bool = False):
    """``U`` as a function of the radius."""
    r2 = np.asarray(r, dtype=float) ** 2
    u = -2.0 * np.log1p(r2 / 8.0)
    if with_exp:
        return u, 1.0 / (1.0 + r2 / 8.0) ** 2
    return u


def kernel_psi(j: int, z):
    """Bounded solutions of ``-lap psi = e^U psi``: ``z1/(8+|z|^2)``, ``z2/(8+|z|^2)``,
    ``(8-|z|^2)/(8+|z|^2)``."""
    z = np.asarray(z, dtype=float)
    r2 = (z ** 2).sum(-1)
    if j == 1:
        return z[..., 0] / (8.0 + r2)
    if j == 2:
        return z[..., 1] / (8.0 + r2)
    if j == 3:
        return (8.0 - r2) / (8.0 + r2)
    raise ValueError("kernel index must be 1, 2 or 3")


# --------------------------------------------------------------------------
# radial profiles


@dataclass
class RadialProfile:
    name: str
    radii: np.ndarray
    values: np.ndarray
    derivative: np.ndarray | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.radii[0] != 0.0 or np.any(np.diff(self.radii) <= 0):
            raise ValueError("radial grid must start at 0 and increase strictly")

    def __call__(self, r):
        return np.interp(r, self.radii, self.values)

    def to_csv(self) -> str:
        head = ", ".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        lines = [f"# {self.name}" + (f" ({head})" if head else "")]
        cols = ["r", self.name] + (["d" + self.name] if self.derivative is not None else [])
        lines.append(",".join(cols))
        for i, r in enumerate(self.radii):
            row = [repr(float(r)), repr(float(self.values[i]))]
            if self.derivative is not None:
                row.append(repr(float(self.derivative[i])))
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def tabulate(name: str, radii, fn, dfn=None, **params) -> RadialProfile:
    """Sample ``fn`` (and ``dfn``) on ``radii``; log singularities at 0 become -inf/inf."""
    radii = np.asarray(radii, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = fn(radii)
        der = None if dfn is None else dfn(radii)
    return RadialProfile(name, radii, vals, der, params)


def psi1_radial(r):
    r = np.asarray(r, dtype=float)
    return (8.0 - r ** 2) / (8.0 + r ** 2)


def dpsi1_radial(r):
    r = np.asarray(r, dtype=float)
    return -32.0 * r / (8.0 + r ** 2) ** 2


def psi2_radial(r):
    r = np.asarray(r, dtype=float)
    return ((8.0 - r ** 2) * np.log(r) + 16.0) / (8.0 + r ** 2)


def dpsi2_radial(r):
    r = np.asarray(r, dtype=float)
    num = (8.0 - r ** 2) * np.log(r) + 16.0
    dnum = -2.0 * r * np.log(r) + (8.0 - r ** 2) / r
    return dnum / (8.0 + r ** 2) - num * 2.0 * r / (8.0 + r ** 2) ** 2


def fundamental_pair(r, source=None):
    """Return ``(psi1~(r), psi2~(r), V(r))``.

    ``V`` is the variation-of-parameters solution of
    ``-V'' - V'/r - e^U V = source`` with ``V(0) = 0``; it is ``None`` when no
    source is given.  ``source`` is a callable of the radius and ``r`` may be
    an array, in which case the cumulative integrals run along it.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    p1 = psi1_radial(r)
    with np.errstate(divide="ignore", invalid="ignore"):
        p2 = psi2_radial(r)
    if source is None:
        return p1, p2, None
    V = np.empty_like(r)
    for k, rk in enumerate(r):
        if rk == 0.0:
            V[k] = 0.0
            continue
        a = integrate.quad(lambda s: s * psi2_radial(s) * source(s), 0.0, rk, limit=200)[0]
        b = integrate.quad(lambda s: s * psi1_radial(s) * source(s), 0.0, rk, limit=200)[0]
        V[k] = psi1_radial(rk) * a - psi2_radial(rk) * b
    return p1, p2, V


def solve_w0(r_max: float = 1e4, step: float = 1e-3, r_start: float = 1e-6) -> RadialProfile:
    """Radial first-order correction ``w0``.

    Integrates ``w'' + w'/r + e^U w = (U^2/2) e^U`` with ``w(0) = w'(0) = 0`` by
    classical RK4 in the variable ``t = log r`` (uniform ``step`` in ``t``),
    starting from the Taylor expansion at ``r_start``.  The local truncation
    error is estimated by step doubling over the first and last stretch of
    the grid.
    """
    t0, t1 = math.log(r_start), math.log(r_max)
    n = int(math.ceil((t1 - t0) / step))
    ts = np.linspace(t0, t1, n + 1)
    dt = ts[1] - ts[0]
    y = np.empty((n + 1, 2))
    # Taylor start: w ~ r^6 / 1152 solves the leading balance w'' + w'/r = r^4/32
    y[0] = [r_start ** 6 / 1152.0, 6.0 * r_start ** 6 / 1152.0]  # (w, dw/dt)
    for k in range(n):
        y[k + 1] = _rk4(ts[k], y[k], dt)
    lte = _lte_estimate(ts, y, dt)
    if lte > 1e-8:
        raise RefinementError(f"RK4 local truncation estimate {lte:.2e} exceeds 1e-8; "
                              "reduce the step")
    r = np.exp(ts)
    radii = np.concatenate([[0.0], r])
    vals = np.concatenate([[0.0], y[:, 0]])
    der = np.concatenate([[0.0], y[:, 1] / r])
    return RadialProfile("w0", radii, vals, der,
                         {"r_max": r_max, "step": step, "r_start": r_start, "lte": float(lte)})


def _w0_rhs(t, y):
    r2 = math.exp(2.0 * t)
    u = -2.0 * math.log1p(r2 / 8.0)
    eu = 1.0 / (1.0 + r2 / 8.0) ** 2
    return np.array([y[1], r2 * eu * (0.5 * u * u - y[0])])


def _rk4(t, y, dt):
    k1 = _w0_rhs(t, y)
    k2 = _w0_rhs(t + dt / 2, y + dt / 2 * k1)
    k3 = _w0_rhs(t + dt / 2, y + dt / 2 * k2)
    k4 = _w0_rhs(t + dt, y + dt * k3)
    return y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _lte_estimate(ts, y, dt):
    # compare one double step against two single steps where the solution is active
    worst = 0.0
    for k in np.linspace(0, len(ts) - 3, 200).astype(int):
        big = _rk4(ts[k], y[k], 2 * dt)
        worst = max(worst, float(np.abs(big - y[k + 2]).max()) / 15.0)
    return worst


def w0_flux(profile: RadialProfile, at: float | None = None) -> float:
    """``2 pi r w0'(r)``, i.e. the integral of ``lap w0`` over the disk of radius ``r``."""
    r = profile.radii[-1] if at is None else at
    d = np.interp(r, profile.radii, profile.derivative)
    return float(2.0 * math.pi * r * d)


# --------------------------------------------------------------------------
# moments


@dataclass(frozen=True)
class MomentTable:
    mass: float
    u_mass: float
    log_moment: float
    w0_flux: float
    provenance: dict = field(default_factory=dict, compare=False)

    def rows(self):
        targets = {
            "mass": 8 * math.pi,
            "u_mass": -16 * math.pi,
            "log_moment": 12 * math.pi * math.log(2),
            "w0_flux": 24 * math.pi,
        }
        return [(k, getattr(self, k), targets[k]) for k in ("mass", "u_mass", "log_moment", "w0_flux")]


def radial_integral(f, R: float = 1e6, tail=None, tol: float = 1e-9) -> float:
    """``2 pi int_0^R f(s) s ds`` on log-spaced adaptive panels.

    ``tail(R)`` is an analytic bound for the neglected part beyond ``R``; it
    must stay below ``tol``.
    """
    if tail is not None:
        bound = tail(R)
        if not bound < tol:
            raise QuadratureError(f"tail bound {bound:.2e} beyond R={R:g} exceeds {tol:g}")
    edges = [0.0, 1e-3] + list(np.logspace(-2, math.log10(R), int(4 * math.log10(R)) + 9))
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, err = integrate.quad(lambda s: f(s) * s, a, b, epsabs=1e-15, epsrel=1e-13, limit=200)
        if err > 1e-11:
            raise QuadratureError(f"panel [{a:g}, {b:g}] error estimate {err:.2e}")
        total += val
    return 2.0 * math.pi * total


def moments(R: float = 1e6, w0_rmax: float = 1e5, w0_step: float = 1e-3) -> MomentTable:
    """Integral constants of ``U`` and the flux of ``w0``.

    Tail bounds use ``e^U <= 64 s^-4``.  The logarithmic moments need a longer
    range than the mass for the same bound, so ``R`` is enlarged for them
    when necessary.
    """
    def eu(s):
        return 1.0 / (1.0 + s * s / 8.0) ** 2

    mass_tail = lambda R: 2 * math.pi * 32.0 / R ** 2
    # int_R^inf 64 s^-3 log s ds = 16 (2 log R + 1) / R^2 bounds both U e^U and log(s) e^U tails
    log_tail = lambda R: 2 * math.pi * 16.0 * (2 * math.log(R) + 1) / R ** 2 * 4
    R_log = R
    while log_tail(R_log) >= 1e-9:
        R_log *= 10.0

    mass = radial_integral(eu, R, mass_tail)
    u_mass = radial_integral(lambda s: -2.0 * math.log1p(s * s / 8.0) * eu(s), R_log, log_tail)
    log_moment = radial_integral(lambda s: (math.log(s) if s > 0 else 0.0) * eu(s), R_log, log_tail)
    w0 = solve_w0(w0_rmax, w0_step)
    flux = w0_flux(w0)
    prov = {"R": R, "R_log": R_log, "w0_rmax": w0_rmax, "w0_step": w0_step,
            "quad": "QUADPACK GK21 on log-spaced panels"}
    return MomentTable(mass, u_mass, log_moment, flux, prov)
