"""Command-line front end: ``lelab solve | green | profiles | verify``.

Exit codes: 0 all good, 1 a verification suite failed, 2 usage error or
singular pair, 3 numeric failure, 4 missing or corrupted artifact.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import re
import sys
import tempfile
import time
from pathlib import Path

from . import __version__

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_NUMERIC, EXIT_MISSING = 0, 1, 2, 3, 4
SUITES = ("expansion", "energy", "conditionB", "pohozaev", "greenforms", "spectrum", "nodal")

log = logging.getLogger("lelab")


class CliError(Exception):
    def __init__(self, code: int, msg: str):
        super().__init__(msg)
        self.code = code


# --------------------------------------------------------------------------
# parsing helpers


def parse_p_range(text: str) -> tuple[float, float, float]:
    """``start:end:factor``, ``start:end`` (factor 1.15) or a single ``p``."""
    parts = str(text).split(":")
    try:
        vals = [float(v) for v in parts]
    except ValueError:
        raise CliError(EXIT_USAGE, f"cannot parse p-range {text!r}") from None
    if len(vals) == 1:
        start = end = vals[0]
        factor = 1.15
    elif len(vals) in (2, 3):
        start, end = vals[:2]
        factor = vals[2] if len(vals) == 3 else 1.15
    else:
        raise CliError(EXIT_USAGE, f"p-range {text!r} must be start:end[:factor]")
    if not start > 1:
        raise CliError(EXIT_USAGE, f"p-range {text!r}: need p > 1 (got start {start:g})")
    if end < start:
        raise CliError(EXIT_USAGE, f"p-range {text!r}: end below start")
    if not factor > 1:
        raise CliError(EXIT_USAGE, f"p-range {text!r}: factor must exceed 1")
    return start, end, factor


def p_grid(start: float, end: float, factor: float) -> list[float]:
    ps = [start]
    while ps[-1] < end * (1 - 1e-12):
        nxt = ps[-1] * factor
        ps.append(end if nxt > end * (1 - 1e-9) else nxt)
    return ps


def parse_point(text: str) -> tuple[float, float]:
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError:
        raise CliError(EXIT_USAGE, f"point {text!r} must look like x,y") from None
    return x, y


def read_config(path) -> list[str]:
    """Flat ``key = value`` file turned into equivalent command-line tokens."""
    p = Path(path)
    if not p.is_file():
        raise CliError(EXIT_MISSING, f"config file {p} not found")
    tokens = []
    for n, line in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise CliError(EXIT_USAGE, f"{p}:{n}: expected key = value")
        flag = "--" + key.strip().replace("_", "-")
        val = val.strip()
        if val.lower() in ("true", "yes", "on"):
            tokens.append(flag)
        elif val.lower() in ("false", "no", "off"):
            continue
        else:
            tokens += [flag] + val.split()
    return tokens


def apply_thread_cap() -> None:
    n = os.environ.get("LEL_THREADS")
    if not n:
        return
    if not n.isdigit() or int(n) < 1:
        raise CliError(EXIT_USAGE, f"LEL_THREADS={n!r} must be a positive integer")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = n


# --------------------------------------------------------------------------
# files


def atomic_write(path: Path, data: str | bytes) -> str:
    """Write through a temporary file and rename; returns the sha256 of the bytes."""
    raw = data.encode("utf-8") if isinstance(data, str) else data
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(raw)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return hashlib.sha256(raw).hexdigest()


def file_hash(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class RunManifest:
    def __init__(self, out: Path, command: str, config: dict):
        self.out = out
        self.data = {"tool": "lelab", "version": __version__, "command": command,
                     "config": config, "files": {}, "stages": {}}

    def write(self, name: str, data: str | bytes) -> Path:
        path = self.out / name
        self.data["files"][name] = atomic_write(path, data)
        return path

    def stage(self, name: str, seconds: float) -> None:
        self.data["stages"][name] = round(seconds, 3)

    def close(self) -> None:
        atomic_write(self.out / "manifest.json", json.dumps(self.data, indent=2, sort_keys=True) + "\n")


def load_manifest(directory: Path) -> dict:
    mpath = directory / "manifest.json"
    if not mpath.is_file():
        raise CliError(EXIT_MISSING, f"missing artifact: {mpath}")
    man = json.loads(mpath.read_text(encoding="utf-8"))
    for name, digest in sorted(man.get("files", {}).items()):
        f = directory / name
        if not f.is_file():
            raise CliError(EXIT_MISSING, f"missing artifact: {f}")
        if file_hash(f) != digest:
            raise CliError(EXIT_MISSING, f"artifact {f} does not match its manifest hash")
    return man


# --------------------------------------------------------------------------
# argument parser


def _common(sp, out=True):
    sp.add_argument("--config", help="flat key = value file mirroring the flags")
    sp.add_argument("--domain", default="disk", help="disk | square | rectangle:W,H | polygon:x,y;...")
    sp.add_argument("--h", type=float, default=0.02, help="background mesh size")
    sp.add_argument("--seed", type=int, default=7, help="seed for sampled diagnostics")
    sp.add_argument("-v", "--verbose", action="store_true")
    if out:
        sp.add_argument("--out", default="lelab-out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lelab", description="Lane-Emden nodal solution lab")
    ap.add_argument("--version", action="version", version=f"lelab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="continuation path of solutions")
    _common(s)
    s.add_argument("--p", default="5:80:1.15", help="start:end[:factor] or a single p")
    s.add_argument("--mode", choices=("nodal", "positive", "radial-nodal"), default="nodal")
    s.add_argument("--pair", nargs=2, metavar="X,Y", help="peak centres for nodal mode")
    s.add_argument("--rtol", type=float, default=1e-10, help="Newton relative tolerance")

    g = sub.add_parser("green", help="Green function and Kirchhoff-Routh data at a pair")
    _common(g, out=False)
    g.add_argument("--out", default=None, help="also write green.json here")
    g.add_argument("--pair", nargs=2, metavar="X,Y")
    g.add_argument("--find-critical", action="store_true", help="minimize Psi first")
    g.add_argument("--green-mode", default="auto",
                   choices=("auto", "analytic-disk", "analytic-rectangle", "numeric"))

    pr = sub.add_parser("profiles", help="limit profiles and moment table")
    _common(pr)

    v = sub.add_parser("verify", help="run verification suites on stored solutions")
    _common(v)
    v.add_argument("--suite", choices=SUITES + ("all",), default="all")
    v.add_argument("--in", dest="input", default="lelab-out", help="directory written by solve")
    v.add_argument("--rho", type=float, default=0.2, help="Pohozaev ball radius")
    v.add_argument("--rho0", type=float, default=0.1, help="sign-ball radius")
    v.add_argument("--rho-forms", type=float, default=0.2, help="circle radius for greenforms")
    v.add_argument("--p-local", type=float, default=40.0,
                   help="p at which the Pohozaev and sign-ball checks run (nearest entry)")
    return ap


_NEG_POINT = re.compile(r"^-[0-9.]+([eE][-+]?[0-9]+)?,")


def parse_args(argv) -> argparse.Namespace:
    argv = list(argv)
    if "--config" in argv:
        i = argv.index("--config")
        if i + 1 >= len(argv):
            raise CliError(EXIT_USAGE, "--config needs a path")
        argv = argv[:i + 2] + read_config(argv[i + 1]) + argv[i + 2:]
        # flags given explicitly after the config tokens win (argparse keeps the last value)
    # "-0.5,0" is a point, not an option; a leading space keeps argparse from
    # treating it as a flag and float() ignores it
    argv = [" " + a if _NEG_POINT.match(a) else a for a in argv]
    parser = build_parser()
    try:
        return parser.parse_args(argv)
    except SystemExit as exc:
        raise CliError(EXIT_USAGE if exc.code else EXIT_OK, "") from None


def config_echo(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("config", "verbose")}


# --------------------------------------------------------------------------
# commands


def default_pair(domain, ev):
    from .green import R_STAR, find_critical_point

    if domain.kind == "disk":
        return ((R_STAR, 0.0), (-R_STAR, 0.0))
    c = domain.center
    if domain.kind == "rectangle":
        init = ((0.3 * domain.width, 0.3 * domain.height), (0.7 * domain.width, 0.7 * domain.height))
    else:
        d = 0.2 * domain.diameter
        init = ((c[0] - d, c[1]), (c[0] + d, c[1]))
    cp = find_critical_point(ev, init)
    return cp.pair


def harmonic_center(domain, ev):
    """Maximizer of the Robin function, where the least-energy positive peak sits."""
    import numpy as np
    from scipy.optimize import minimize

    if domain.kind == "disk":
        return (0.0, 0.0)
    res = minimize(lambda z: -ev.robin(z), np.asarray(domain.center, dtype=float),
                   method="Nelder-Mead", options={"xatol": 1e-8, "fatol": 1e-12})
    return tuple(map(float, res.x))


def cmd_solve(args) -> int:
    import numpy as np
    from .green import GreenEvaluator
    from .mesh import DomainSpec, MeshError
    from .solver import (LaneEmdenProblem, NonConvergenceError, PathTerminationError,
                         concentration_mesh, continuation, seed_scale, solve_radial_nodal)

    start, end, factor = parse_p_range(args.p)
    domain = DomainSpec.parse(args.domain)
    if not args.h > 0:
        raise CliError(EXIT_USAGE, "--h must be positive")
    out = Path(args.out)
    man = RunManifest(out, "solve", config_echo(args))
    t0 = time.perf_counter()

    if args.mode == "radial-nodal":
        if domain.kind != "disk":
            raise CliError(EXIT_USAGE, "radial-nodal mode needs --domain disk")
        rows = ["p,alpha,u_max_plus,u_max_minus,node_radius,condition_b"]
        for p in p_grid(start, end, factor):
            try:
                rs = solve_radial_nodal(p)
            except (RuntimeError, ValueError) as exc:
                raise CliError(EXIT_NUMERIC, f"stage shooting (p={p:g}): {exc}") from None
            man.write(f"radial_p{p:.6g}.csv", rs.to_csv())
            rows.append(f"{p!r},{rs.alpha!r},{rs.max_positive!r},{rs.max_negative!r},"
                        f"{rs.node_radius!r},{p * (rs.max_positive - rs.max_negative)!r}")
            print(f"p={p:.6g} u(0)={rs.alpha:.6f} min={-rs.max_negative:.6f}")
        man.write("radial_path.csv", "\n".join(rows) + "\n")
        man.stage("shooting", time.perf_counter() - t0)
        man.close()
        return EXIT_OK

    core = seed_scale(end) / 30.0
    if core < 1e-12 * domain.diameter:
        raise CliError(EXIT_USAGE, f"p_end={end:g} needs peak spacing {core:.1e}, below what double "
                                   f"precision coordinates resolve; lower p_end (about 100 is the cap)")
    ev = GreenEvaluator(domain, h=args.h)
    if args.mode == "nodal":
        pair = tuple(parse_point(t) for t in args.pair) if args.pair else default_pair(domain, ev)
        if math.dist(*pair) == 0:
            raise CliError(EXIT_USAGE, "singular pair: the two peaks coincide")
        peaks = [(pair[0], 1), (pair[1], -1)]
    else:
        peaks = [(harmonic_center(domain, ev), 1)]
    man.stage("peaks", time.perf_counter() - t0)

    t = time.perf_counter()
    try:
        mesh = concentration_mesh(domain, args.h, [c for c, _ in peaks], end)
    except (MeshError, ValueError) as exc:
        raise CliError(EXIT_NUMERIC, f"stage mesh: {exc}") from None
    man.write("mesh.json", json.dumps(mesh.to_json()) + "\n")
    man.stage("mesh", time.perf_counter() - t)
    print(f"mesh: {mesh.n_vertices} vertices, {len(mesh.triangles)} triangles")

    t = time.perf_counter()
    problem = LaneEmdenProblem(mesh)

    def report(sol):
        print(f"p={sol.p:.6g} u+={sol.u_max_plus:.6f} u-={sol.u_max_minus:.6f} "
              f"J={sol.energy:.6g} newton={sol.newton_iters}", flush=True)

    failure = None
    try:
        path = continuation(problem, start, end, peaks, factor=factor, rtol=args.rtol, callback=report)
    except PathTerminationError as exc:
        path, failure = exc.path, exc
    except NonConvergenceError as exc:
        path, failure = None, exc
    man.stage("continuation", time.perf_counter() - t)
    if path is not None:
        for i, sol in enumerate(path.entries):
            man.write(f"solution_{i:03d}.json", json.dumps(sol.to_json()) + "\n")
        man.write("path.csv", path.to_csv())
    man.close()
    if failure is not None:
        raise CliError(EXIT_NUMERIC, f"stage continuation: {failure}")
    return EXIT_OK


def cmd_green(args) -> int:
    import numpy as np
    from .green import GreenError, GreenEvaluator, find_critical_point, kirchhoff_routh
    from .mesh import DomainSpec

    domain = DomainSpec.parse(args.domain)
    try:
        ev = GreenEvaluator(domain, mode=args.green_mode, h=args.h)
        result = {}
        if args.find_critical:
            if args.pair:
                init = tuple(parse_point(t) for t in args.pair)
            elif domain.kind == "disk":
                init = ((0.3, 0.1), (-0.2, -0.3))
            else:
                init = None
            if init is None:
                pair = default_pair(domain, ev)
                cp = find_critical_point(ev, pair)
            else:
                cp = find_critical_point(ev, init)
            result["critical"] = cp.to_dict()
            result["critical"]["radius"] = float(np.hypot(*cp.pair[0]))
            pair = cp.pair
        elif args.pair:
            pair = tuple(parse_point(t) for t in args.pair)
        else:
            raise CliError(EXIT_USAGE, "green needs --pair X,Y X,Y or --find-critical")
        if math.dist(*pair) == 0:
            raise CliError(EXIT_USAGE, f"singular pair: both points at {pair[0]}")
        rep = kirchhoff_routh(ev, *pair, derivatives=True)
    except GreenError as exc:
        raise CliError(EXIT_USAGE, f"singular pair: {exc}") from None
    result["kirchhoff_routh"] = rep.to_dict()
    text = json.dumps(result, indent=2, sort_keys=True) + "\n"
    sys.stdout.write(text)
    if args.out:
        man = RunManifest(Path(args.out), "green", config_echo(args))
        man.write("green.json", text)
        man.close()
    return EXIT_OK


MOMENT_TOL = {"mass": ("abs", 1e-8), "u_mass": ("abs", 1e-8), "log_moment": ("abs", 1e-8),
              "w0_flux": ("rel", 1e-3)}


def cmd_profiles(args) -> int:
    import numpy as np
    from . import profiles as pf

    out = Path(args.out)
    man = RunManifest(out, "profiles", config_echo(args))
    t = time.perf_counter()
    try:
        table = pf.moments()
        w0 = pf.solve_w0(1e3, 2e-3)
    except (pf.QuadratureError, pf.RefinementError) as exc:
        raise CliError(EXIT_NUMERIC, f"stage moments: {exc}") from None
    man.stage("moments", time.perf_counter() - t)

    radii = np.union1d(np.linspace(0.0, 20.0, 401), [math.sqrt(8.0)])
    man.write("U.csv", pf.tabulate("U", radii, pf.u_radial).to_csv())
    man.write("psi1.csv", pf.tabulate("psi1", radii, pf.psi1_radial, pf.dpsi1_radial).to_csv())
    man.write("psi2.csv", pf.tabulate("psi2", radii, pf.psi2_radial, pf.dpsi2_radial).to_csv())
    keep = np.searchsorted(w0.radii, np.geomspace(1e-3, w0.radii[-1], 400))
    keep = np.unique(np.concatenate([[0], np.clip(keep, 0, len(w0.radii) - 1)]))
    man.write("w0.csv", pf.RadialProfile("w0", w0.radii[keep], w0.values[keep],
                                         w0.derivative[keep], w0.params).to_csv())

    rows = ["name,value,target,error,tolerance,pass"]
    ok = True
    for name, val, target in table.rows():
        kind, tol = MOMENT_TOL[name]
        err = abs(val - target) if kind == "abs" else abs(val - target) / abs(target)
        passed = err <= tol
        ok &= passed
        rows.append(f"{name},{val!r},{target!r},{err!r},{tol!r},{int(passed)}")
        print(f"{name:11s} {val:.10f}  target {target:.10f}  {'ok' if passed else 'MISS'}")
    man.write("moments.csv", "\n".join(rows) + "\n")
    man.close()
    if not ok:
        raise CliError(EXIT_NUMERIC, "a moment missed its tolerance")
    return EXIT_OK


def load_path(directory: Path):
    from .mesh import Mesh
    from .solver import ContinuationPath, Solution

    man = load_manifest(directory)
    names = sorted(n for n in man["files"] if n.startswith("solution_"))
    if "mesh.json" not in man["files"] or not names:
        raise CliError(EXIT_MISSING, f"missing artifact: no mesh.json / solution dumps in {directory}")
    mesh = Mesh.load(directory / "mesh.json")
    sols = sorted((Solution.load(directory / n, mesh) for n in names), key=lambda s: s.p)
    path = ContinuationPath()
    for s in sols:
        path.append(s)
    return mesh, path


def run_suites(suites, args, mesh=None, path=None):
    """Run the selected suites; returns ``{suite: [CheckReport, ...]}``."""
    import numpy as np
    from . import verify as vf
    from .green import R_STAR, GreenEvaluator
    from .mesh import DomainSpec

    domain = mesh.domain if mesh is not None else DomainSpec.parse(args.domain)
    ev = GreenEvaluator(domain, mesh=mesh if domain.kind == "polygon" else None, h=args.h)
    out = {}
    entries = path.entries if path is not None else []
    local = min(entries, key=lambda s: (abs(s.p - args.p_local), s.p)) if entries else None

    for suite in suites:
        reps = []
        if suite == "expansion":
            reps.append(vf.check_peak_expansion(path, ev))
            prof = vf.CheckReport("profile")
            pts = []
            for s in entries:
                try:
                    rp = vf.rescale(s, vf.extract_peaks(s))
                except vf.ResolutionError:
                    continue
                if s.p >= 20:
                    pts.append((s.p, rp.dev_u))
            if len(pts) >= 3:
                rate = -vf.fit_slope(np.log([q for q, _ in pts]), np.log([d for _, d in pts]))
                dec = vf.monotone([d for _, d in pts], increasing=False)
                for q, d in pts:
                    prof.add(q, d, 1.0 / q, d * q, dec and 0.7 <= rate <= 1.3)
                prof.notes.update(rate=rate, decreasing=dec)
                prof.passed = dec and 0.7 <= rate <= 1.3
            else:
                prof.passed = False
                prof.notes["entries"] = len(pts)
            reps.append(prof)
            slope = vf.eps_slope(path)
            es = vf.CheckReport("eps_slope")
            es.add(entries[-1].p, slope, -0.25, abs(slope + 0.25), -0.27 <= slope <= -0.23)
            es.passed = es.rows[0].passed
            reps.append(es)
            C, ref, ok = vf.decay_envelope(entries[-1], vf.extract_peaks(entries[-1]))
            env = vf.CheckReport("envelope")
            env.add(entries[-1].p, C, ref, C / ref, ok)
            env.passed = ok
            reps.append(env)
        elif suite == "energy":
            reps.append(vf.check_energy_expansion(path, ev))
            reps.append(vf.check_mass_path(path))
        elif suite == "conditionB":
            reps.append(vf.check_condition_B(path, ev))
        elif suite == "pohozaev":
            rep = vf.CheckReport("pohozaev")
            pk = vf.extract_peaks(local)
            for i, label in enumerate(("plus", "minus")):
                if pk.points[i] is None:
                    continue
                lhs, rhs, res = vf.pohozaev_check(local, pk.points[i], args.rho)
                rep.add(local.p, lhs, rhs, res, res <= 0.02, label)
            rep.passed = all(r.passed for r in rep.rows)
            reps.append(rep)
        elif suite == "greenforms":
            if entries:
                pk = vf.extract_peaks(entries[-1])
                pair = pk.points
            elif domain.kind == "disk":
                pair = ((R_STAR, 0.0), (-R_STAR, 0.0))
            else:
                pair = default_pair(domain, ev)
            reps.append(vf.green_quadratic_forms(ev, pair[0], pair[1], args.rho_forms))
        elif suite == "spectrum":
            from .solver import LaneEmdenProblem
            K = LaneEmdenProblem(mesh).K
            specs = [vf.nondegeneracy_spectrum(s, K=K) for s in entries[-4:]]
            rep = vf.check_spectrum_path(specs, domain.kind)
            pk = vf.extract_peaks(entries[-1])
            if pk.points[1] is not None:
                mid = np.add(pk.points[0], pk.points[1]) / 2
                d = np.subtract(pk.points[0], pk.points[1])
                idx = vf.cluster(specs[-1])
                rep.notes["odd_defect"] = vf.odd_mode_defect(mesh, specs[-1].vectors[:, idx], mid, d, K=K)
            reps.append(rep)
        elif suite == "nodal":
            last = entries[-1]
            dist, ncomp = vf.nodal_line_diag(last)
            rep = vf.CheckReport("nodal_line")
            rep.add(last.p, dist, 2 * mesh.h, dist, dist <= 2 * mesh.h, "boundary_distance")
            rep.add(last.p, ncomp, 2, abs(ncomp - 2), ncomp == 2, "sign_domains")
            rep.passed = all(r.passed for r in rep.rows)
            reps.append(rep)
            pk = vf.extract_peaks(local)
            ok, detail = vf.sign_ball_check(mesh, local.values, local.p, pk.points, args.rho0)
            sb = vf.CheckReport("sign_ball")
            sb.add(local.p, detail["plus"] + detail["minus"], 0, detail["plus"] + detail["minus"], ok)
            sb.passed = ok
            reps.append(sb)
            reps.append(vf.check_local_mass(last, args.rho0))
            dev = vf.p_u_convergence(last, ev, seed=args.seed)
            pu = vf.CheckReport("pu_green")
            pu.add(last.p, dev, 10.0 / last.p, dev, dev <= 10.0 / last.p)
            pu.passed = pu.rows[0].passed
            reps.append(pu)
        out[suite] = reps
    return out


def summary_text(args, results) -> str:
    lines = ["[config]"]
    for k, v in config_echo(args).items():
        if k in ("input", "out"):
            continue
        lines.append(f"{k} = {v}")
    lines.append("")
    lines.append("[suites]")
    for suite, reps in results.items():
        lines.append(f"{suite} = {'PASS' if all(r.passed for r in reps) else 'FAIL'}")
    lines.append("")
    lines.append("[checks]")
    for suite, reps in results.items():
        for r in reps:
            lines.append(f"{suite}.{r.summary_line()}")
    return "\n".join(lines) + "\n"


def cmd_verify(args) -> int:
    suites = SUITES if args.suite == "all" else (args.suite,)
    mesh = path = None
    if suites != ("greenforms",):
        mesh, path = load_path(Path(args.input))
    man = RunManifest(Path(args.out), "verify", config_echo(args))
    t = time.perf_counter()
    try:
        results = run_suites(suites, args, mesh, path)
    except (ValueError, RuntimeError) as exc:
        raise CliError(EXIT_NUMERIC, f"stage verify: {exc}") from None
    man.stage("verify", time.perf_counter() - t)
    for suite, reps in results.items():
        for r in reps:
            man.write(f"{suite}_{r.name}.csv", r.to_csv())
    text = summary_text(args, results)
    man.write("summary.txt", text)
    man.close()
    sys.stdout.write(text)
    return EXIT_OK if all(r.passed for reps in results.values() for r in reps) else EXIT_FAILED


COMMANDS = {"solve": cmd_solve, "green": cmd_green, "profiles": cmd_profiles, "verify": cmd_verify}


def main(argv=None) -> int:
    try:
        apply_thread_cap()
        args = parse_args(sys.argv[1:] if argv is None else argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except CliError as exc:
        if str(exc):
            print(f"lelab: {exc}", file=sys.stderr)
        return exc.code
    except Exception as exc:  # solver and quadrature failures surface here
        from .fem import SolverError
        from .mesh import MeshError
        if isinstance(exc, (SolverError, MeshError, ArithmeticError)):
            print(f"lelab: numeric failure: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        raise


if __name__ == "__main__":
    sys.exit(main())
