"""Command-line front end: sweeps, verification, persistence, reports.

Subcommands: spectrum, bulk, quotient, abrikosov, limit, glapp, verify,
report.  Every run appends JSON-lines records to the cache (one per solved
point, keyed by a config hash; identical reruns are cache hits unless
--force) and writes a CSV summary; `report` re-reads the cache offline and
renders matplotlib figures next to the delimited output.

Exit codes: 0 success, 1 verification failure, 2 invalid configuration,
3 solver failure (partial results are kept).
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._descent import DescentOptions
from .abrikosov import LLLProblem, minimize_abrikosov
from .asymptotics import (bracket_constant, check_new_formula, estimate_from_pairs,
                          extrapolate_blk, solve_dual_pair, _point_seed)
from .bulk import BulkProblem, minimize_bulk
from .cache import JsonlCache, cache_dir, config_hash, make_record
from .fullgl import (GLConfig, GLConfigError, cutoff_energy, fit_l4_bound,
                     gauge_probe, local_l4_scan, minimize_gl)
from .grid import (BoundaryCondition, GridError, build_grid, build_links,
                   default_points, periodic_grid)
from .operator import MagneticOperator, SolverError, lll_basis, lowest_eigenpairs
from .quotient import QuotientProblem, minimize_quotient, quotient_value

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_BAD_CONFIG = 2
EXIT_SOLVER = 3

_BC_CHOICES = ("dirichlet", "neumann", "periodic")


class CLIError(Exception):
    """Invalid configuration; maps to exit code 2."""


# ---------------------------------------------------------------------------
# small helpers
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    """Stable shortest round-trip formatting for CSV determinism."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _parse_floats(text: str, name: str) -> list[float]:
    try:
        vals = [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError as exc:
        raise CLIError(f"--{name}: cannot parse {text!r}") from exc
    if not vals:
        raise CLIError(f"--{name}: empty list")
    return vals


def _parse_ints(text: str, name: str) -> list[int]:
    return [int(round(v)) for v in _parse_floats(text, name)]


def _parse_bcs(text: str) -> list[str]:
    kinds = [t.strip().lower() for t in str(text).split(",") if t.strip()]
    for k in kinds:
        if k not in _BC_CHOICES:
            raise CLIError(f"--bc: unknown closure {k!r}; choose from {_BC_CHOICES}")
    if not kinds:
        raise CLIError("--bc: empty list")
    return kinds


def _load_config_file(path: str) -> dict:
    cfg = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CLIError(f"{path}:{lineno}: expected 'key = value'")
        key, val = line.split("=", 1)
        cfg[key.strip().replace("-", "_")] = val.strip()
    return cfg


def _resolve(args, key: str, fallback):
    """Config-file value unless the flag was given; flags win."""
    val = getattr(args, key, None)
    if val is not None:
        return val
    if key in args._file_config:
        return args._file_config[key]
    return fallback


def _bc_from_kind(kind: str, flux: int) -> BoundaryCondition:
    if kind == "periodic":
        return BoundaryCondition.periodic(flux)
    return BoundaryCondition(kind)


def _validate_b(b_values) -> list[float]:
    for b in b_values:
        if not (0.0 < b <= 1.0):
            raise CLIError(f"--b: {b} outside the valid range (0, 1]")
    return list(b_values)


# ---------------------------------------------------------------------------
# shared sweep runner with cache
# ---------------------------------------------------------------------------

def _run_points(module: str, points: list[dict], solver, cache: JsonlCache,
                force: bool) -> list[dict]:
    """Solve each point unless cached; return records in input order."""
    out = []
    for params in points:
        h = config_hash(module, params)
        rec = None if force else cache.lookup(h)
        if rec is None:
            t0 = time.perf_counter()
            results = solver(params)
            rec = make_record(module, params, results, time.perf_counter() - t0)
            cache.append(rec)
        out.append(rec)
    return out


def _common_params(args) -> dict:
    return dict(version=__version__,
                tol=float(_resolve(args, "tol", 1e-8)),
                restarts=int(_resolve(args, "restarts", 3)),
                seed=int(_resolve(args, "seed", 0)))


def _descent_opts(params: dict, point_key: tuple) -> DescentOptions:
    return DescentOptions(restarts=params["restarts"], gtol=params["tol"],
                          seed=_point_seed(params["seed"], point_key))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_spectrum(args, out_dir: Path, cache: JsonlCache) -> int:
    flux = _parse_ints(_resolve(args, "flux", "8"), "flux")
    kinds = _parse_bcs(_resolve(args, "bc", "periodic"))
    base = _common_params(args)
    eig_tol = min(base["tol"], 1e-9) if base["tol"] < 1e-6 else 1e-9
    points = []
    for N in flux:
        R = float(np.sqrt(2 * np.pi * N))
        n = int(_resolve(args, "n", 0)) or default_points(R)
        for kind in kinds:
            k = N + 2 if kind == "periodic" else 6
            points.append(dict(base, bc=kind, flux=N, n=n, k=k, eig_tol=eig_tol))

    def solver(p):
        R = float(np.sqrt(2 * np.pi * p["flux"]))
        g = build_grid(R, p["n"], _bc_from_kind(p["bc"], p["flux"]))
        op = MagneticOperator(g, build_links(g))
        res = lowest_eigenpairs(op, p["k"], tol=p["eig_tol"], seed=p["seed"])
        return dict(R=g.R, values=[float(v) for v in res.values],
                    residuals=[float(r) for r in res.residuals],
                    iterations=res.iterations, converged=res.converged)

    records = _run_points("spectrum", points, solver, cache, args.force)
    rows = []
    for rec in records:
        p, r = rec["params"], rec["results"]
        for idx, (val, resid) in enumerate(zip(r["values"], r["residuals"]), 1):
            rows.append([p["bc"], p["flux"], r["R"], p["n"], idx, val, resid])
    _write_csv(out_dir / "spectrum_summary.csv",
               ["bc", "flux", "R", "n", "index", "value", "residual"], rows)
    if args.plot:
        from .plots import plot_spectrum
        for rec in records:
            p, r = rec["params"], rec["results"]
            plot_spectrum(r["values"], p["flux"],
                          out_dir / f"spectrum_N{p['flux']}_{p['bc']}.png")
    print(f"spectrum: {len(records)} record(s) -> {out_dir}")
    return EXIT_OK


def _solve_bulk_point(p: dict) -> dict:
    R = float(np.sqrt(2 * np.pi * p["flux"]))
    g = build_grid(R, p["n"], _bc_from_kind(p["bc"], p["flux"]))
    prob = BulkProblem(b=p["b"], grid=g, links=build_links(g))
    s = minimize_bulk(prob, _descent_opts(p, (p["b"], p["bc"], p["flux"], p["n"])))
    return dict(R=g.R, energy=s.energy, energy_per_area=s.energy / g.R ** 2,
                l2_sq=s.l2_sq, l4_4=s.l4_4, sup=s.sup,
                virial_defect=s.virial_defect, grad_norm=s.grad_norm,
                restarts=s.restarts, iterations=s.iterations,
                converged=s.converged, trivial=s.trivial)


def cmd_bulk(args, out_dir: Path, cache: JsonlCache) -> int:
    b_values = _validate_b(_parse_floats(_resolve(args, "b", "0.5"), "b"))
    flux = _parse_ints(_resolve(args, "flux", "8"), "flux")
    kinds = _parse_bcs(_resolve(args, "bc", "periodic"))
    base = _common_params(args)
    points = []
    for b in b_values:
        for N in flux:
            n = int(_resolve(args, "n", 0)) or default_points(np.sqrt(2 * np.pi * N))
            for kind in kinds:
                points.append(dict(base, b=b, bc=kind, flux=N, n=n))
    records = _run_points("bulk", points, _solve_bulk_point, cache, args.force)
    rows = [[rec["params"][k] for k in ("bc", "b", "flux", "n", "seed")]
            + [rec["results"][k] for k in
               ("R", "energy", "energy_per_area", "l2_sq", "l4_4", "sup",
                "virial_defect", "grad_norm", "restarts", "iterations",
                "converged", "trivial")]
            for rec in records]
    _write_csv(out_dir / "bulk_summary.csv",
               ["bc", "b", "flux", "n", "seed", "R", "energy", "energy_per_area",
                "l2_sq", "l4_4", "sup", "virial_defect", "grad_norm", "restarts",
                "iterations", "converged", "trivial"], rows)
    print(f"bulk: {len(records)} record(s) -> {out_dir}")
    return EXIT_OK


def _solve_quotient_point(p: dict) -> dict:
    R = float(np.sqrt(2 * np.pi * p["flux"]))
    g = build_grid(R, p["n"], _bc_from_kind(p["bc"], p["flux"]))
    prob = QuotientProblem(b=p["b"], grid=g, links=build_links(g),
                           allow_degenerate=p["b"] > 1 - 1e-3)
    s = minimize_quotient(prob, _descent_opts(p, (p["b"], p["bc"], p["flux"], p["n"])))
    return dict(R=g.R, m=s.m, m_per_length=s.m / g.R,
                multiplier_residual=s.multiplier_residual,
                nonnegative=s.nonnegative, restarts=s.restarts,
                iterations=s.iterations, converged=s.converged)


def cmd_quotient(args, out_dir: Path, cache: JsonlCache) -> int:
    b_values = _validate_b(_parse_floats(_resolve(args, "b", "0.5"), "b"))
    flux = _parse_ints(_resolve(args, "flux", "8"), "flux")
    kinds = _parse_bcs(_resolve(args, "bc", "periodic"))
    base = _common_params(args)
    points = []
    for b in b_values:
        for N in flux:
            n = int(_resolve(args, "n", 0)) or default_points(np.sqrt(2 * np.pi * N))
            for kind in kinds:
                points.append(dict(base, b=b, bc=kind, flux=N, n=n))
    records = _run_points("quotient", points, _solve_quotient_point, cache, args.force)
    rows = [[rec["params"][k] for k in ("bc", "b", "flux", "n", "seed")]
            + [rec["results"][k] for k in
               ("R", "m", "m_per_length", "multiplier_residual", "nonnegative",
                "restarts", "iterations", "converged")]
            for rec in records]
    _write_csv(out_dir / "quotient_summary.csv",
               ["bc", "b", "flux", "n", "seed", "R", "m", "m_per_length",
                "multiplier_residual", "nonnegative", "restarts", "iterations",
                "converged"], rows)
    print(f"quotient: {len(records)} record(s) -> {out_dir}")
    return EXIT_OK


def _solve_abrikosov_point(p: dict) -> dict:
    g = periodic_grid(p["flux"], p["n"])
    basis = lll_basis(MagneticOperator(g, build_links(g)), tol=1e-9, seed=p["seed"])
    prob = LLLProblem.from_eigen(g, basis)
    res = minimize_abrikosov(prob, DescentOptions(
        restarts=max(p["restarts"], 4), gtol=p["tol"],
        seed=_point_seed(p["seed"], ("ab", p["flux"], p["n"]))))
    return dict(R=g.R, e_ab=res.e_ab, per_area=res.per_area, beta=res.beta,
                iterations=res.iterations, converged=res.converged)


def cmd_abrikosov(args, out_dir: Path, cache: JsonlCache) -> int:
    flux = _parse_ints(_resolve(args, "flux", "8"), "flux")
    base = _common_params(args)
    points = []
    for N in flux:
        n = int(_resolve(args, "n", 0)) or default_points(np.sqrt(2 * np.pi * N))
        points.append(dict(base, flux=N, n=n))
    records = _run_points("abrikosov", points, _solve_abrikosov_point, cache,
                          args.force)
    rows = [[rec["params"]["flux"], rec["params"]["n"], rec["params"]["seed"]]
            + [rec["results"][k] for k in
               ("R", "e_ab", "per_area", "beta", "iterations", "converged")]
            for rec in records]
    _write_csv(out_dir / "abrikosov_summary.csv",
               ["flux", "n", "seed", "R", "e_ab", "per_area", "beta",
                "iterations", "converged"], rows)
    print(f"abrikosov: {len(records)} record(s) -> {out_dir}")
    return EXIT_OK


def _solve_pair_point(p: dict) -> dict:
    R = float(np.sqrt(2 * np.pi * p["flux"]))
    bc = _bc_from_kind(p["bc"], p["flux"])
    pr = solve_dual_pair(p["b"], bc, R, n=p["n"],
                         opts=_descent_opts(p, (p["b"], p["bc"], p["flux"], p["n"])))
    return dict(R=pr.R, e=pr.bulk.energy, e_per_area=pr.e_per_area,
                m=pr.quotient.m, m_per_length=pr.m_per_length,
                duality_defect=pr.duality_defect,
                virial_defect=pr.bulk.virial_defect, l2_sq=pr.bulk.l2_sq,
                l4_4=pr.bulk.l4_4, trivial=pr.bulk.trivial,
                nonnegative=pr.quotient.nonnegative,
                converged=bool(pr.bulk.converged and pr.quotient.converged))


def cmd_limit(args, out_dir: Path, cache: JsonlCache) -> int:
    b_values = _validate_b(_parse_floats(_resolve(args, "b", "0.5"), "b"))
    flux = _parse_ints(_resolve(args, "flux", "4,8,16"), "flux")
    kinds = _parse_bcs(_resolve(args, "bc", "periodic"))
    if len(set(flux)) < 3:
        raise CLIError("--flux: the limit extrapolation needs >= 3 distinct flux values")
    base = _common_params(args)
    points = []
    for b in b_values:
        for kind in kinds:
            for N in flux:
                n = int(_resolve(args, "n", 0)) or default_points(np.sqrt(2 * np.pi * N))
                points.append(dict(base, b=b, bc=kind, flux=N, n=n))
    jobs = int(_resolve(args, "jobs", 1))
    if jobs > 1:
        # precompute misses concurrently, then fill the cache in key order
        from concurrent.futures import ProcessPoolExecutor
        misses = [p for p in points
                  if args.force or cache.lookup(config_hash("pair", p)) is None]
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            solved = list(ex.map(_solve_pair_point, misses))
        for p, results in zip(misses, solved):
            cache.append(make_record("pair", p, results, wall_time=-1.0))
    records = _run_points("pair", points, _solve_pair_point, cache, False)

    sweep_rows = [[rec["params"][k] for k in ("b", "bc", "flux", "n", "seed")]
                  + [rec["results"][k] for k in
                     ("R", "e", "e_per_area", "m", "m_per_length",
                      "duality_defect", "virial_defect", "converged")]
                  for rec in records]
    _write_csv(out_dir / "limit_sweep.csv",
               ["b", "bc", "flux", "n", "seed", "R", "e", "e_per_area", "m",
                "m_per_length", "duality_defect", "virial_defect", "converged"],
               sweep_rows)

    fit_rows = []
    estimates = []
    for b in b_values:
        for kind in kinds:
            pts = [(rec["results"]["R"], rec["results"]["e_per_area"],
                    rec["results"]["m_per_length"])
                   for rec in records
                   if rec["params"]["b"] == b and rec["params"]["bc"] == kind]
            est = extrapolate_blk(pts, b=b, bc_kind=kind)
            estimates.append(est)
            row = [b, kind, est.e_blk, est.e_blk_slope, est.e_blk_residual,
                   est.e_new, est.e_new_slope]
            if est.e_blk < 0:
                rep = check_new_formula(est)
                row += [rep["rel_defect"], rep["bracket_constant"]]
            else:
                row += [float("nan"), float("nan")]
            fit_rows.append(row)
    _write_csv(out_dir / "limit_fits.csv",
               ["b", "bc", "e_blk", "slope", "fit_residual", "e_new",
                "e_new_slope", "new_formula_defect_rel", "bracket_constant"],
               fit_rows)
    if args.plot:
        from .plots import plot_bracket, plot_limit_fit
        plot_limit_fit(estimates, out_dir / "limit_fit.png")
        for est in estimates:
            if est.e_blk < 0:
                rep = check_new_formula(est)
                plot_bracket(rep, out_dir / f"bracket_b{est.b:g}_{est.bc_kind}.png")
    print(f"limit: {len(records)} point(s), {len(fit_rows)} fit(s) -> {out_dir}")
    return EXIT_OK


def cmd_glapp(args, out_dir: Path, cache: JsonlCache) -> int:
    kappas = _parse_floats(_resolve(args, "kappa", "12,16,24"), "kappa")
    hratios = _parse_floats(_resolve(args, "hratio", "0.85,0.95,1.0,1.05"), "hratio")
    side = float(_resolve(args, "side", 2.0))
    domain = str(_resolve(args, "domain", "square"))
    base = _common_params(args)
    gl_tol = float(_resolve(args, "gl_tol", 2e-2))
    maxiter = int(_resolve(args, "maxiter", 2500))
    points = []
    for kappa in kappas:
        for hr in hratios:
            H = hr * kappa
            hmax = (kappa * H) ** -0.5 / 6.0
            m = int(_resolve(args, "n", 0)) or int(8 * np.ceil(side / hmax / 8))
            points.append(dict(base, kappa=kappa, h_ratio=hr, m=m, side=side,
                               domain=domain, gl_tol=gl_tol, maxiter=maxiter))

    def solver(p):
        cfg = GLConfig(kappa=p["kappa"], H=p["h_ratio"] * p["kappa"], m=p["m"],
                       domain=p["domain"], side=p["side"], tol=p["gl_tol"],
                       maxiter=p["maxiter"], seed=p["seed"])
        st = minimize_gl(cfg)
        try:
            scan = local_l4_scan(st)
        except GLConfigError:
            scan = []
        center = (0.5 * p["side"], 0.5 * p["side"])
        try:
            probe = gauge_probe(st, center, cfg.kappa ** -0.5)
        except GLConfigError:
            probe = float("nan")
        try:
            cut = cutoff_energy(st, center)
        except GLConfigError:
            cut = dict(value=float("nan"), grad_term=float("nan"),
                       quartic=float("nan"), defect=float("nan"))
        return dict(energy=st.energy, psi_sup=st.psi_sup, hg=cfg.hg,
                    curl_dev_sup=st.curl_deviation_sup,
                    residual_psi=st.residual_psi, residual_A=st.residual_A,
                    iterations=st.iterations, converged=st.converged,
                    gauge_probe=probe, cutoff_value=cut["value"],
                    cutoff_grad_term=cut["grad_term"],
                    scan=[[r["cx"], r["cy"], r["avg_psi4"]] for r in scan])

    records = _run_points("glapp", points, solver, cache, args.force)

    per_state_rows = []
    for rec in records:
        p = rec["params"]
        rows = [dict(cx=c[0], cy=c[1], avg_psi4=c[2], kappa=p["kappa"],
                     h_ratio=p["h_ratio"]) for c in rec["results"]["scan"]]
        per_state_rows.append(rows)
    with_scan = [rows for rows in per_state_rows if rows]
    coeffs = fit_l4_bound(with_scan) if len(with_scan) >= 2 else None

    scan_rows, summary_rows = [], []
    for rec, rows in zip(records, per_state_rows):
        p, r = rec["params"], rec["results"]
        ratio2 = (p["h_ratio"] - 1.0) ** 2
        rhs = (coeffs[0] / p["kappa"] + coeffs[1] * ratio2) if coeffs else float("nan")
        n_pass = 0
        for row in rows:
            ok = row["avg_psi4"] <= rhs if coeffs else ""
            n_pass += bool(ok)
            scan_rows.append([p["kappa"], p["h_ratio"], row["cx"], row["cy"],
                              row["avg_psi4"], rhs, ok])
        summary_rows.append([
            p["kappa"], p["h_ratio"], p["m"], p["side"], p["domain"], p["seed"],
            r["energy"], r["psi_sup"], 1.0 + 5.0 * r["hg"], r["curl_dev_sup"],
            p["kappa"] * r["curl_dev_sup"], r["residual_psi"], r["residual_A"],
            r["iterations"], r["converged"], len(rows), n_pass,
            max((row["avg_psi4"] for row in rows), default=float("nan")),
            r["gauge_probe"], r["cutoff_value"], r["cutoff_grad_term"]])
    _write_csv(out_dir / "glapp_scan.csv",
               ["kappa", "h_ratio", "cx", "cy", "avg_psi4", "rhs", "pass"],
               scan_rows)
    _write_csv(out_dir / "glapp_summary.csv",
               ["kappa", "h_ratio", "m", "side", "domain", "seed", "energy",
                "psi_sup", "one_plus_5h", "curl_dev_sup", "kappa_curl_dev",
                "residual_psi", "residual_A", "iterations", "converged",
                "n_squares", "n_under_bound", "max_avg_psi4", "gauge_probe",
                "cutoff_value", "cutoff_grad_term"], summary_rows)
    notes = out_dir / "glapp_notes.txt"
    notes.write_text(
        "Local scan squares have side-length 2*kappa^(-1/2) (area 4/kappa).\n"
        "The quoted |Q| normalization follows the side-length convention; a\n"
        "2/kappa area normalization would differ by the constant factor 2.\n"
        + (f"Fitted bound: C1={coeffs[0]!r}, C2={coeffs[1]!r} "
           "(avg|psi|^4 <= C1/kappa + C2*(H/kappa-1)^2)\n" if coeffs else ""))
    if args.plot and scan_rows:
        from .plots import plot_l4_scan
        rows_for_plot = [dict(kappa=row[0], h_ratio=row[1], avg_psi4=row[4],
                              rhs=row[5]) for row in scan_rows]
        plot_l4_scan(rows_for_plot, out_dir / "glapp_scan.png")
    print(f"glapp: {len(records)} state(s), {len(scan_rows)} square(s) -> {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def cmd_verify(args, out_dir: Path, cache: JsonlCache) -> int:
    seed = int(_resolve(args, "seed", 0))
    n = int(_resolve(args, "n", 0)) or 48
    flux = int(_resolve(args, "flux", 4))
    checks: list[tuple[str, float, float, bool]] = []

    def add(name, value, threshold, ok=None):
        ok = (value <= threshold) if ok is None else ok
        checks.append((name, float(value), float(threshold), bool(ok)))

    R = float(np.sqrt(2 * np.pi * flux))
    gp = periodic_grid(flux, n)
    lp = build_links(gp)
    opp = MagneticOperator(gp, lp)
    eig = lowest_eigenpairs(opp, flux + 2, tol=1e-9, seed=seed)
    add("spectrum.band_defect", np.abs(eig.values[:flux] - 1.0).max(), 2e-2)
    add("spectrum.gap_to_next", 2.5 - eig.values[flux], 0.0,
        ok=eig.values[flux] >= 2.5)

    lam = {}
    for kind in _BC_CHOICES:
        g = build_grid(R, 32, _bc_from_kind(kind, flux))
        lam[kind] = lowest_eigenpairs(MagneticOperator(g, build_links(g)), 1,
                                      seed=seed).values[0]
    add("spectrum.bc_ordering",
        max(lam["neumann"] - lam["periodic"], lam["periodic"] - lam["dirichlet"]),
        0.0, ok=lam["neumann"] <= lam["periodic"] <= lam["dirichlet"])

    pair_solutions = {}
    for kind in _BC_CHOICES:
        bc = _bc_from_kind(kind, flux)
        pr = solve_dual_pair(0.5, bc, R, n=n,
                             opts=DescentOptions(restarts=2, seed=seed))
        pair_solutions[kind] = pr
        add(f"duality.{kind}", pr.duality_defect, 1e-4)
        add(f"virial.{kind}", pr.bulk.virial_defect, 1e-6 * max(pr.bulk.l2_sq, 1e-12))

    opts = DescentOptions(restarts=2, seed=seed)
    e_lo = minimize_bulk(BulkProblem(b=0.3, grid=gp, links=lp), opts).energy
    e_hi = pair_solutions["periodic"].bulk.energy  # b = 0.5 on the same grid
    add("bulk.monotone_in_b", e_lo - e_hi, 0.0, ok=e_lo <= e_hi)

    rng = np.random.default_rng(seed)
    u = gp.random_field(rng)
    qp = QuotientProblem(b=0.5, grid=gp, links=lp)
    v0 = quotient_value(qp, u)
    scale_dev = abs(quotient_value(qp, 2.7 * u) - v0) / max(abs(v0), 1e-30)
    add("quotient.scale_invariance", scale_dev, 1e-11)

    basis = lll_basis(opp, seed=seed)
    ab = minimize_abrikosov(LLLProblem.from_eigen(gp, basis),
                            DescentOptions(restarts=4, seed=seed))
    add("abrikosov.per_area_range", abs(ab.per_area + 0.25) - 0.25, 0.0,
        ok=-0.5 <= ab.per_area < 0.0)
    add("abrikosov.beta_at_least_1", 1.0 - ab.beta, 0.0, ok=ab.beta >= 1.0)

    rows = [[name, value, threshold, passed]
            for name, value, threshold, passed in checks]
    _write_csv(out_dir / "verify_results.csv",
               ["check", "value", "threshold", "passed"], rows)
    width = max(len(c[0]) for c in checks)
    print(f"{'check'.ljust(width)}  {'value':>13}  {'threshold':>13}  result")
    for name, value, threshold, passed in checks:
        print(f"{name.ljust(width)}  {value:13.6g}  {threshold:13.6g}  "
              f"{'PASS' if passed else 'FAIL'}")
    n_fail = sum(not c[3] for c in checks)
    print(f"verify: {len(checks) - n_fail}/{len(checks)} checks passed -> {out_dir}")
    return EXIT_OK if n_fail == 0 else EXIT_CHECK_FAILED


def cmd_report(args, out_dir: Path, cache: JsonlCache) -> int:
    from .plots import plot_blk_curve, plot_bracket, plot_l4_scan, plot_limit_fit
    all_recs = cache.records()
    pair_recs = [rec for rec in all_recs if rec["module"] == "pair"]
    made = []
    if pair_recs:
        groups: dict[tuple, list] = {}
        for rec in pair_recs:
            key = (rec["params"]["b"], rec["params"]["bc"])
            groups.setdefault(key, []).append(rec)
        estimates = []
        curve = {}
        for (b, kind), recs in sorted(groups.items()):
            pts = sorted({(r["results"]["R"], r["results"]["e_per_area"],
                           r["results"]["m_per_length"]) for r in recs})
            if len(pts) < 3:
                continue
            est = extrapolate_blk(pts, b=b, bc_kind=kind)
            estimates.append(est)
            if kind == "periodic":
                curve[b] = est.e_blk
            if est.e_blk < 0:
                rep = check_new_formula(est)
                made.append(plot_bracket(rep, out_dir / f"bracket_b{b:g}_{kind}.png"))
        if estimates:
            made.append(plot_limit_fit(estimates, out_dir / "limit_fit.png"))
        if len(curve) >= 2:
            ab_recs = [r for r in all_recs if r["module"] == "abrikosov"]
            e_ab = ab_recs[-1]["results"]["per_area"] if ab_recs else None
            made.append(plot_blk_curve(sorted(curve.items()),
                                       out_dir / "blk_curve.png",
                                       e_ab_per_area=e_ab))
            _write_csv(out_dir / "blk_curve.csv", ["b", "e_blk"],
                       [[b, E] for b, E in sorted(curve.items())])
    scan_csv = out_dir / "glapp_scan.csv"
    if scan_csv.exists():
        with open(scan_csv, newline="", encoding="utf-8") as f:
            rows = [dict(kappa=float(r["kappa"]), h_ratio=float(r["h_ratio"]),
                         avg_psi4=float(r["avg_psi4"]),
                         rhs=float(r["rhs"]) if r["rhs"] not in ("", "nan") else None)
                    for r in csv.DictReader(f)]
        rows = [{k: v for k, v in r.items() if v is not None} for r in rows]
        if rows:
            made.append(plot_l4_scan(rows, out_dir / "glapp_scan.png"))
    if not made:
        print("report: no cached records to render (run limit/abrikosov/glapp first)")
        return EXIT_OK
    print("report: rendered " + ", ".join(p.name for p in made) + f" -> {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser / entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="glbulk",
        description="Bulk-energy hierarchy of the Ginzburg-Landau model on a "
                    "magnetic square: spectra, ground states, limits, and "
                    "full-GL diagnostics.")
    p.add_argument("--version", action="version", version=f"glbulk {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--b", help="comma-separated field ratios in (0, 1]")
        sp.add_argument("--flux", help="comma-separated integer flux values N")
        sp.add_argument("--bc", help="comma-separated closures: "
                                     "dirichlet,neumann,periodic")
        sp.add_argument("--n", type=int, help="grid intervals per side "
                                              "(default: resolution policy)")
        sp.add_argument("--tol", type=float, help="minimizer gradient tolerance")
        sp.add_argument("--restarts", type=int, help="random restarts per solve")
        sp.add_argument("--seed", type=int, help="base random seed")
        sp.add_argument("--jobs", type=int, help="parallel workers for sweeps")
        sp.add_argument("--out", help="output directory (default: ./out)")
        sp.add_argument("--force", action="store_true",
                        help="ignore cached records")
        sp.add_argument("--plot", action="store_true",
                        help="render figures next to the CSV output")
        sp.add_argument("--config", help="flat key=value config file; flags win")

    for name in ("spectrum", "bulk", "quotient", "abrikosov", "limit",
                 "verify", "report"):
        common(sub.add_parser(name))
    gl = sub.add_parser("glapp")
    common(gl)
    gl.add_argument("--kappa", help="comma-separated GL parameters")
    gl.add_argument("--hratio", help="comma-separated H/kappa ratios")
    gl.add_argument("--side", type=float, help="domain side (default 2.0)")
    gl.add_argument("--domain", choices=("square", "disk"))
    gl.add_argument("--gl-tol", dest="gl_tol", type=float,
                    help="normalized EL residual target")
    gl.add_argument("--maxiter", type=int)
    return p


_DISPATCH = {
    "spectrum": cmd_spectrum,
    "bulk": cmd_bulk,
    "quotient": cmd_quotient,
    "abrikosov": cmd_abrikosov,
    "limit": cmd_limit,
    "glapp": cmd_glapp,
    "verify": cmd_verify,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args._file_config = (_load_config_file(args.config)
                             if getattr(args, "config", None) else {})
        out_dir = Path(_resolve(args, "out", "out"))
        out_dir.mkdir(parents=True, exist_ok=True)
        cache = JsonlCache(cache_dir(out_dir) / "records.jsonl")
        return _DISPATCH[args.command](args, out_dir, cache)
    except (CLIError, GridError, GLConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except SolverError as exc:
        print(f"solver failure: {exc} (partial results kept)", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
