"""Batch convergence-study driver, verification suites, and mesh dump.

Subcommands:
  study1d    sweep (eps, p) for a 1D catalog problem, write results.csv,
             fit.json and a gnuplot script
  study2d    same for the 2D Bessel disk problem
  verify     run named invariant suites, emit a JSON summary, exit nonzero
             on failure
  dump-mesh  write a mesh description as JSON

Configuration comes from an optional TOML file plus command-line overrides;
the (eps, p) grid is dispatched to a thread pool capped by SBL_FEM_THREADS
and results are written in a deterministic order.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import fem1d, fem2d, meshing, problems

ERROR_FLOOR = 1e-12

P_RANGE_1D = (3, 16)
P_RANGE_2D = (2, 8)


@dataclass
class StudyConfig:
    dimension: int
    problem: str
    eps_list: tuple
    p_min: int
    p_max: int
    kappa: float = 1.0
    rho0: float = 0.5
    n_sectors: int = 8
    out_dir: str = "study_out"

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.dimension}")
        for e in self.eps_list:
            if not 0.0 < e <= 1.0:
                raise ValueError(f"eps values must lie in (0, 1], got {e}")
        lo, hi = P_RANGE_1D if self.dimension == 1 else P_RANGE_2D
        if not lo <= self.p_min <= self.p_max <= hi:
            raise ValueError(
                f"p range [{self.p_min}, {self.p_max}] outside supported "
                f"[{lo}, {hi}] for {self.dimension}D"
            )


def fit_exponential(ps, errs, floor: float = ERROR_FLOOR):
    """Least-squares fit ln(err) = ln C - beta * p, excluding rows at the
    solver floor.  Returns (beta, lnC, r2, n_used)."""
    ps = np.asarray(ps, dtype=float)
    errs = np.asarray(errs, dtype=float)
    keep = errs > floor
    ps, errs = ps[keep], errs[keep]
    if ps.size < 2:
        return float("nan"), float("nan"), float("nan"), int(ps.size)
    le = np.log(errs)
    a = np.vstack([np.ones_like(ps), -ps]).T
    coef, *_ = np.linalg.lstsq(a, le, rcond=None)
    resid = le - a @ coef
    ss_tot = float(np.sum((le - le.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(coef[1]), float(coef[0]), r2, int(ps.size)


def _max_workers() -> int:
    env = os.environ.get("SBL_FEM_THREADS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


def _run_one_1d(name: str, eps: float, p: int, kappa: float):
    t0 = time.perf_counter()
    prob = problems.catalog_1d(name, eps)
    fld = fem1d.solve_1d(prob, kappa, p)
    rep = fem1d.norms_1d(
        fem1d.FieldError(prob.exact.u, fld), fld.mesh, prob,
        meta={"p": p, "kappa": kappa},
    )
    dofs = fld.dofmap.free.size
    wall_ms = 1000.0 * (time.perf_counter() - t0)
    return rep, dofs, wall_ms


def _run_one_2d(eps: float, p: int, kappa: float, rho0: float, n_sectors: int,
                b: float = 1.0, c: float = 1.0, f0: float = 1.0):
    t0 = time.perf_counter()
    ex = problems.bessel_exact_disk(eps, b, c, f0)
    prob = fem2d.ProblemSpec2D(eps, b, c, ex.f, exact=ex, name="BESSEL")
    fld = fem2d.solve_mixed(prob, kappa, p, rho0=rho0, n_sectors=n_sectors)
    rep = fem2d.norms_2d(
        fem2d.MixedFieldError(ex, fld), fld.mesh, p, prob,
        meta={"p": p, "kappa": kappa},
    )
    dofs = fld.dofmap.dimension
    wall_ms = 1000.0 * (time.perf_counter() - t0)
    return rep, dofs, wall_ms


CSV_HEADER = "problem,eps,p,kappa,energy,balanced,max,c1max,dofs,wall_ms\n"


def run_study(config: StudyConfig) -> dict:
    """Run the (eps, p) grid, write results.csv / fit.json / plot.gp, and
    return the fit summary."""
    os.makedirs(config.out_dir, exist_ok=True)
    grid = [(eps, p) for eps in config.eps_list
            for p in range(config.p_min, config.p_max + 1)]

    def task(args):
        eps, p = args
        try:
            if config.dimension == 1:
                rep, dofs, ms = _run_one_1d(config.problem, eps, p, config.kappa)
            else:
                rep, dofs, ms = _run_one_2d(
                    eps, p, config.kappa, config.rho0, config.n_sectors
                )
            return (eps, p, rep, dofs, ms, None)
        except Exception as exc:  # per-run failures recorded, study continues
            return (eps, p, None, 0, 0.0, repr(exc))

    with ThreadPoolExecutor(max_workers=_max_workers()) as pool:
        results = list(pool.map(task, grid))
    results.sort(key=lambda r: (-r[0], r[1]))

    rows, failures = [], []
    for eps, p, rep, dofs, ms, err in results:
        if err is not None:
            failures.append({"eps": eps, "p": p, "error": err})
            continue
        rows.append((config.problem, eps, p, config.kappa, rep.energy,
                     rep.balanced, rep.max, rep.c1max, dofs, ms))

    csv_path = os.path.join(config.out_dir, "results.csv")
    with open(csv_path, "w") as fh:
        fh.write(CSV_HEADER)
        for r in rows:
            fh.write(
                f"{r[0]},{r[1]:.6e},{r[2]},{r[3]:.6e},{r[4]:.12e},"
                f"{r[5]:.12e},{r[6]:.12e},{r[7]:.12e},{r[8]},{r[9]:.3f}\n"
            )

    fits = {"problem": config.problem, "kappa": config.kappa, "per_eps": [],
            "envelope": {}, "failures": failures}
    for eps in config.eps_list:
        sub = [(r[2], r[5]) for r in rows if r[1] == eps]
        if sub:
            beta, lnc, r2, nn = fit_exponential(*zip(*sub))
            fits["per_eps"].append(
                {"eps": eps, "beta": beta, "lnC": lnc, "r2": r2, "n": nn}
            )
    env = {}
    for r in rows:
        env[r[2]] = max(env.get(r[2], 0.0), r[5])
    if env:
        ps = sorted(env)
        beta, lnc, r2, nn = fit_exponential(ps, [env[p] for p in ps])
        fits["envelope"] = {
            "beta": beta, "lnC": lnc, "r2": r2, "n": nn,
            "errors": {str(p): env[p] for p in ps},
        }
    with open(os.path.join(config.out_dir, "fit.json"), "w") as fh:
        json.dump(fits, fh, indent=2)

    with open(os.path.join(config.out_dir, "plot.gp"), "w") as fh:
        fh.write(
            "set datafile separator ','\n"
            "set logscale y\n"
            "set xlabel 'p'\n"
            "set ylabel 'balanced-norm error'\n"
            "set key autotitle columnhead\n"
            f"plot 'results.csv' using 3:6 with linespoints title '{config.problem}'\n"
        )
    return fits


# ---------------------------------------------------------------------------
# verification suites
# ---------------------------------------------------------------------------


def _check(name, value, bound, larger_is_bad=True):
    ok = value <= bound if larger_is_bad else value >= bound
    return {"name": name, "status": "pass" if ok else "fail",
            "value": float(value), "bound": float(bound)}


def _suite_quadrature():
    checks = []
    worst_g, worst_gl, worst_w = 0.0, 0.0, 0.0
    for n in range(1, 33):
        rule = problems_rule = None
        from .polybasis import gauss_lobatto_rule, gauss_rule
        g = gauss_rule(n)
        worst_w = max(worst_w, abs(float(np.sum(g.weights)) - 2.0))
        for deg in range(0, g.order + 1):
            exact = 2.0 / (deg + 1) if deg % 2 == 0 else 0.0
            got = float(np.sum(g.weights * g.points**deg))
            worst_g = max(worst_g, abs(got - exact) / max(abs(exact), 1.0))
        if n >= 2:
            gl = gauss_lobatto_rule(n)
            worst_w = max(worst_w, abs(float(np.sum(gl.weights)) - 2.0))
            for deg in range(0, gl.order + 1):
                exact = 2.0 / (deg + 1) if deg % 2 == 0 else 0.0
                got = float(np.sum(gl.weights * gl.points**deg))
                worst_gl = max(worst_gl, abs(got - exact) / max(abs(exact), 1.0))
    checks.append(_check("gauss_exactness_n<=32", worst_g, 1e-12))
    checks.append(_check("gauss_lobatto_exactness_n<=32", worst_gl, 1e-12))
    checks.append(_check("weights_sum_to_2", worst_w, 1e-13))
    return checks


def _suite_basis():
    from .polybasis import c1_basis, gauss_lobatto_basis
    rng = np.random.default_rng(7)
    checks = []
    worst = 0.0
    for p in (3, 5, 8, 12):
        basis = c1_basis(p)
        q = rng.standard_normal(p + 1)
        coef = basis.expand(q)
        t = np.linspace(-1.0, 1.0, 50)
        from numpy.polynomial import legendre as npleg
        worst = max(worst, float(np.max(np.abs(coef @ basis.eval_all(t) -
                                               npleg.legval(t, q)))))
    checks.append(_check("c1_poly_reproduction", worst, 1e-11))
    worst_bub = 0.0
    for p in (5, 9):
        basis = c1_basis(p)
        ends = np.array([-1.0, 1.0])
        for j in range(4, basis.n_funcs):
            vals = basis.eval_all(ends)[j]
            ders = basis.eval_all(ends, 1)[j]
            worst_bub = max(worst_bub, float(np.max(np.abs(np.concatenate([vals, ders])))))
    checks.append(_check("bubble_double_zeros", worst_bub, 1e-13))
    worst_gl = 0.0
    for p in (2, 6, 10):
        glb = gauss_lobatto_basis(p)
        worst_gl = max(worst_gl, float(np.max(np.abs(
            glb.eval_all(glb.nodes) - np.eye(p + 1)))))
        t = np.linspace(-1.0, 1.0, 40)
        worst_gl = max(worst_gl, float(np.max(np.abs(
            glb.eval_all(t).sum(axis=0) - 1.0))))
    checks.append(_check("gl_cardinal_and_partition", worst_gl, 1e-12))
    return checks


def _suite_interp():
    from . import approx1d
    checks = []
    mesh = meshing.build_mesh_1d(1.0, 7, 1e-3)
    rng = np.random.default_rng(3)
    coefs = rng.standard_normal(8)
    poly = problems.PolyFn(coefs)
    interp = approx1d.interpolate_c1(poly, mesh, 7)
    x = np.linspace(0.0, 1.0, 73)
    checks.append(_check(
        "interp_poly_reproduction",
        float(np.max(np.abs(interp.eval(x) - poly(x)))) / max(1.0, float(np.max(np.abs(poly(x))))),
        1e-11,
    ))
    prob = problems.catalog_1d("LAYERED", 1e-4)
    mesh = meshing.build_mesh_1d(1.0, 6, 1e-4)
    interp = approx1d.interpolate_c1(prob.exact.u, mesh, 6)
    nodal = max(
        float(np.max(np.abs(interp.eval(mesh.nodes) - prob.exact.u(mesh.nodes, 0)))),
        float(np.max(np.abs(interp.eval(mesh.nodes, 1) - prob.exact.u(mesh.nodes, 1)))),
    )
    checks.append(_check("interp_endpoint_exactness", nodal, 1e-11))
    twice = approx1d.interpolate_c1(lambda x, k=0: interp.eval(x, k), mesh, 6)
    checks.append(_check(
        "interp_projection_idempotent",
        float(np.max(np.abs(twice.coeffs - interp.coeffs))),
        1e-12 * max(1.0, float(np.max(np.abs(interp.coeffs)))),
    ))
    # orthogonality residual of (I_p w - w)'' against P_{p-2}
    from numpy.polynomial import legendre as npleg
    from .polybasis import gauss_rule
    worst = 0.0
    for i in range(mesh.n_elements):
        a, b = mesh.element(i)
        h = b - a
        x, w = gauss_rule(80).mapped(a, b)
        t = 2.0 * (x - a) / h - 1.0
        resid = interp.eval(x, 2) - prob.exact.u(x, 2)
        wsemi = np.sqrt(np.sum(w * prob.exact.u(x, 2) ** 2))
        for deg in range(0, 5):
            e = np.zeros(deg + 1)
            e[deg] = 1.0
            q = npleg.legval(t, e)
            qn = np.sqrt(np.sum(w * q * q))
            worst = max(worst, abs(float(np.sum(w * resid * q))) / (wsemi * qn))
    checks.append(_check("interp_orthogonality_residual", worst, 1e-9))
    return checks


def _suite_galerkin():
    checks = []
    prob = problems.catalog_1d("LAYERED", 1e-4)
    fld = fem1d.solve_1d(prob, 1.0, 6)
    checks.append(_check("galerkin_residual_1d",
                         fem1d.galerkin_residual(prob, fld), 1e-8))
    ex = problems.bessel_exact_disk(1e-3, 1.0, 1.0, 1.0)
    prob2 = fem2d.ProblemSpec2D(1e-3, 1.0, 1.0, ex.f, exact=ex, name="BESSEL")
    fld2 = fem2d.solve_mixed(prob2, 1.0, 4, n_sectors=4)
    checks.append(_check("galerkin_residual_2d",
                         fem2d.galerkin_residual_2d(prob2, fld2), 1e-8))
    return checks


def _suite_continuity():
    checks = []
    prob = problems.catalog_1d("LAYERED", 1e-5)
    fld = fem1d.solve_1d(prob, 1.0, 7)
    worst = 0.0
    scale = float(np.max(np.abs(fld.coeffs)))
    for xn in fld.mesh.nodes[1:-1]:
        for k in (0, 1):
            left = fld.eval(xn, k, side="left")
            right = fld.eval(xn, k, side="right")
            worst = max(worst, abs(left - right))
    checks.append(_check("c1_continuity_1d", worst / max(scale, 1.0), 1e-11))

    ex = problems.bessel_exact_disk(1e-3, 1.0, 1.0, 1.0)
    prob2 = fem2d.ProblemSpec2D(1e-3, 1.0, 1.0, ex.f, exact=ex, name="BESSEL")
    fld2 = fem2d.solve_mixed(prob2, 1.0, 3, n_sectors=4)
    pairs, _ = meshing.edge_pairing(fld2.mesh)
    s = np.linspace(0.0, 1.0, 20)
    worst2 = 0.0
    for (ea, edge_a), (eb, edge_b) in pairs:
        xa, ya = fld2.mesh.elements[ea].edge_curve(edge_a, s)
        xb, yb = fld2.mesh.elements[eb].edge_curve(edge_b, s)
        order = np.argsort(np.argsort(xa + 2.0 * ya))
        order_b = np.argsort(np.argsort(xb + 2.0 * yb))
        for which in ("u", "w"):
            va = _edge_values(fld2, ea, edge_a, s, which)
            vb = _edge_values(fld2, eb, edge_b, s, which)
            va_sorted = va[np.argsort(xa + 2.0 * ya)]
            vb_sorted = vb[np.argsort(xb + 2.0 * yb)]
            worst2 = max(worst2, float(np.max(np.abs(va_sorted - vb_sorted))))
    scale2 = max(1.0, float(np.max(np.abs(fld2.w_coeffs))))
    checks.append(_check("c0_traces_2d", worst2 / scale2, 1e-10))
    return checks


def _edge_values(fld, ei, edge, s, which):
    zeros = np.zeros_like(s)
    ones = np.ones_like(s)
    if edge == "xi0":
        xi, eta = zeros, s
    elif edge == "xi1":
        xi, eta = ones, s
    elif edge == "eta0":
        xi, eta = s, zeros
    else:
        xi, eta = s, ones
    return fld.eval_element(ei, xi, eta, which)


def _suite_mesh():
    checks = []
    m1 = meshing.build_mesh_1d(1.0, 3, 0.01)
    checks.append(_check("mesh1d_tau", abs(m1.tau - 0.03), 0.0, larger_is_bad=True))
    checks.append(_check(
        "mesh1d_symmetry",
        float(np.max(np.abs(m1.nodes + m1.nodes[::-1] - 1.0))), 1e-15,
    ))
    mesh = meshing.build_mesh_disk(0.5, 8, 1.0, 6, 1e-4)
    checks.append(_check("mesh2d_area_pi", abs(mesh.area(20) - np.pi), 1e-8))
    try:
        meshing.edge_pairing(mesh)
        checks.append(_check("mesh2d_half_edge_pairing", 0.0, 1.0))
    except ValueError:
        checks.append(_check("mesh2d_half_edge_pairing", 2.0, 1.0))
    rule = np.linspace(0.003, 0.997, 16)
    xi, eta = np.meshgrid(rule, rule)
    worst = 0.0
    for el in mesh.elements:
        worst = min(worst, float(np.min(el.det_j(xi, eta))))
    checks.append(_check("mesh2d_positive_jacobians", -worst, 0.0))
    return checks


def _suite_chi_bounds():
    from .approx1d import Corrector, CorrectorKind, corrector
    checks = []
    worst = 0.0
    for kind, i in ((CorrectorKind.CHI0, 0), (CorrectorKind.CHI1, 1)):
        for k in (0, 1, 2):
            vals = []
            for tau in (1e-1, 1e-3, 1e-5):
                chi = corrector(tau, kind)
                vals.append(chi.seminorm(k) / tau ** (1.5 - k - i))
            spread = (max(vals) - min(vals)) / max(vals)
            worst = max(worst, spread)
    checks.append(_check("chi_scaling_uniform_1pct", worst, 0.01))
    chi0 = corrector(0.37, CorrectorKind.CHI0)
    checks.append(_check(
        "chi0_l2_closed_form",
        abs(chi0.seminorm(0) - 0.37**1.5 / np.sqrt(105.0)), 1e-10,
    ))
    return checks


def _suite_inverse_inequality():
    from .approx1d import markov_ratio_sweep
    checks = []
    worst_const = 0.0
    for p in (2, 4, 8):
        for k in (1, 2):
            if k > p:
                continue
            r1 = markov_ratio_sweep(p, k, seed=0, n_random=1000)
            r2 = markov_ratio_sweep(p, k, seed=1, n_random=1000)
            rel = abs(r1 - r2) / max(r1, r2)
            checks.append(_check(f"markov_seed_stability_p{p}_k{k}", rel, 0.05))
            worst_const = max(worst_const, r1, r2)
    checks.append(_check("markov_uniform_constant", worst_const, 4.0))
    return checks


SUITES = {
    "QUADRATURE": _suite_quadrature,
    "BASIS": _suite_basis,
    "INTERP": _suite_interp,
    "GALERKIN": _suite_galerkin,
    "CONTINUITY": _suite_continuity,
    "MESH": _suite_mesh,
    "CHI_BOUNDS": _suite_chi_bounds,
    "INVERSE_INEQ": _suite_inverse_inequality,
}


def verify(suite: str = "ALL") -> dict:
    """Run one named suite or all of them; returns the JSON-able summary."""
    names = list(SUITES) if suite.upper() == "ALL" else [suite.upper()]
    for name in names:
        if name not in SUITES:
            raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    checks = []
    for name in names:
        for chk in SUITES[name]():
            chk["suite"] = name
            checks.append(chk)
    n_fail = sum(1 for c in checks if c["status"] != "pass")
    return {"suite": suite.upper(), "n_checks": len(checks),
            "n_failed": n_fail, "checks": checks}


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _study_config(args, dimension: int) -> StudyConfig:
    raw = _load_config(args.config)
    eps = args.eps if args.eps else raw.get(
        "eps", [1e-2, 1e-4, 1e-6, 1e-8] if dimension == 1 else [1e-2, 1e-4, 1e-6]
    )
    lo, hi = P_RANGE_1D if dimension == 1 else P_RANGE_2D
    return StudyConfig(
        dimension=dimension,
        problem=args.problem or raw.get("problem", "LAYERED" if dimension == 1 else "BESSEL"),
        eps_list=tuple(float(e) for e in eps),
        p_min=args.p_min or int(raw.get("p_min", lo)),
        p_max=args.p_max or int(raw.get("p_max", 12 if dimension == 1 else hi)),
        kappa=args.kappa or float(raw.get("kappa", 1.0)),
        rho0=float(raw.get("rho0", 0.5)),
        n_sectors=int(raw.get("n_sectors", 8)),
        out_dir=args.out or raw.get("out", "study_out"),
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sblfem",
                                     description="rp-FEM convergence studies")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("study1d", "study2d"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="TOML config file")
        sp.add_argument("--problem")
        sp.add_argument("--eps", type=float, nargs="+")
        sp.add_argument("--p-min", type=int, dest="p_min")
        sp.add_argument("--p-max", type=int, dest="p_max")
        sp.add_argument("--kappa", type=float)
        sp.add_argument("--out")
    vp = sub.add_parser("verify")
    vp.add_argument("suite", nargs="?", default="ALL")
    vp.add_argument("--out", help="write the JSON summary here")
    mp = sub.add_parser("dump-mesh")
    mp.add_argument("--dimension", type=int, default=2, choices=(1, 2))
    mp.add_argument("--kappa", type=float, default=1.0)
    mp.add_argument("--p", type=int, default=4)
    mp.add_argument("--eps", type=float, default=1e-4)
    mp.add_argument("--rho0", type=float, default=0.5)
    mp.add_argument("--n-sectors", type=int, default=8, dest="n_sectors")
    mp.add_argument("--out", default="mesh.json")

    args = parser.parse_args(argv)
    if args.command in ("study1d", "study2d"):
        config = _study_config(args, 1 if args.command == "study1d" else 2)
        fits = run_study(config)
        env = fits.get("envelope", {})
        print(f"study written to {config.out_dir}: envelope beta="
              f"{env.get('beta', float('nan')):.4f} r2={env.get('r2', float('nan')):.4f}")
        return 0
    if args.command == "verify":
        summary = verify(args.suite)
        text = json.dumps(summary, indent=2)
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        print(text)
        return 1 if summary["n_failed"] else 0
    if args.command == "dump-mesh":
        if args.dimension == 1:
            mesh = meshing.build_mesh_1d(args.kappa, args.p, args.eps)
        else:
            mesh = meshing.build_mesh_disk(
                args.rho0, args.n_sectors, args.kappa, args.p, args.eps
            )
        meshing.dump_mesh(mesh, args.out)
        print(f"mesh written to {args.out}")
        return 0
    return 2


if __name__ == "__main__":
    sys.exit(main())
