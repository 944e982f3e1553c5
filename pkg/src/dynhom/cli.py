"""Command-line front end: ``dynhom run`` and ``dynhom check``."""
import argparse
import csv
import logging
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .assembly import assemble, truncation_sweep
from .config import SCHEMA_VERSION, emit_normalized, load_config
from .errors import ConfigError, DynhomError, SingularEffectiveCompliance
from .solver import (effective_properties, eigenfields, energy_reality_check,
                     reconstruct_fields, solve_influence, willis_self_adjointness_check)
from .unitcell import SpectralGrid

logger = logging.getLogger("dynhom")

EXIT_OK = 0
EXIT_HARD = 1
EXIT_BREACH = 2

VOIGT_LABELS = ("11", "22", "33", "23", "31", "12")
AXES = ("1", "2", "3")
RESIDUAL_COLUMNS = ("res_herm_D", "res_herm_rho", "res_adjoint_S", "res_energy_imag",
                    "res_willis_sa")
N_ENERGY_PROBES = 16


def _tensor_columns():
    cols = []
    for name, rows, colnames in (("D", VOIGT_LABELS, VOIGT_LABELS),
                                 ("S1", VOIGT_LABELS, AXES),
                                 ("S2", AXES, VOIGT_LABELS),
                                 ("rho", AXES, AXES)):
        for r in rows:
            for c in colnames:
                cols += [f"{name}_{r}_{c}_re", f"{name}_{r}_{c}_im"]
    return cols


RESULT_COLUMNS = (("schema_version", "index", "q1_rad_m", "q2_rad_m", "q3_rad_m",
                   "omega_rad_s", "n_max_1", "n_max_2", "n_max_3", "status")
                  + tuple(_tensor_columns()) + RESIDUAL_COLUMNS
                  + ("rcond", "max_contrast_cond", "wall_ms", "message"))


def energy_probes(eff, count=N_ENERGY_PROBES, seed=0):
    """Unit probes plus seeded random complex ones, velocity scaled to match stress."""
    rng = np.random.default_rng(seed)
    d_mag = float(np.max(np.abs(eff.d_bar)))
    rho_mag = float(np.max(np.abs(eff.rho_bar)))
    v_scale = np.sqrt(d_mag / rho_mag) if rho_mag > 0 else 1.0
    probes = [(np.eye(6)[i], np.zeros(3)) for i in range(6)]
    probes += [(np.zeros(6), v_scale * np.eye(3)[i]) for i in range(3)]
    for _ in range(count):
        s = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        u = v_scale * (rng.standard_normal(3) + 1j * rng.standard_normal(3))
        probes.append((s, u))
    return probes


def solve_point(cfg, index, q, omega, n_max, points=None):
    """Solve one sweep point; solver failures become a flagged record."""
    rec = {"schema_version": SCHEMA_VERSION, "index": index, "q": q, "omega": omega,
           "n_max": n_max, "status": "ok", "message": "", "eff": None,
           "residuals": {}, "rcond": float("nan"), "max_contrast_cond": float("nan"),
           "convergence": None, "fields": None, "warnings": []}
    t0 = time.perf_counter()
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            grid = SpectralGrid(n_max=n_max, q=q, omega=omega)
            system = assemble(cfg.cell, grid)
            inf = solve_influence(system)
            eff = effective_properties(inf, system)
            rec["eff"] = eff
            rec["rcond"] = inf.rcond
            conds = [c for c in system.augmentation_cond if np.isfinite(c)]
            rec["max_contrast_cond"] = max(conds) if conds else float("nan")
            res = dict(eff.residuals())
            res["energy_imag"] = energy_reality_check(eff, energy_probes(eff))
            if cfg.willis_check:
                try:
                    res["willis_sa"] = willis_self_adjointness_check(cfg.cell, q, omega, n_max)
                except SingularEffectiveCompliance as exc:
                    rec["warnings"].append(f"Willis check skipped: {exc}")
            elif not eff.has_willis:
                rec["warnings"].append(f"Willis form unavailable: {eff.willis_error}")
            rec["residuals"] = res
            if cfg.convergence_n_max:
                rec["convergence"] = truncation_sweep(cfg.cell, q, omega, cfg.convergence_n_max)
            if points is not None:
                eig = eigenfields(inf, cfg.mean_stress, cfg.mean_velocity)
                rec["fields"] = reconstruct_fields(cfg.cell, grid, eig, points)
        rec["warnings"] += [str(w.message) for w in caught]
        breach = [k for k, v in res.items() if v >= cfg.residual_tol]
        if breach:
            rec["status"] = "residual_breach"
            rec["message"] = "residuals above tolerance: " + " ".join(breach)
    except DynhomError as exc:
        rec["status"] = "error"
        rec["message"] = f"{type(exc).__name__}: {exc}"
    rec["wall_ms"] = 1e3 * (time.perf_counter() - t0)
    return rec


def _fmt(v):
    return repr(float(v))


def _record_row(rec):
    q = rec["q"]
    n = rec["n_max"]
    row = [str(rec["schema_version"]), str(rec["index"]), _fmt(q[0]), _fmt(q[1]), _fmt(q[2]),
           _fmt(rec["omega"]), str(n[0]), str(n[1]), str(n[2]), rec["status"]]
    eff = rec["eff"]
    if eff is None:
        row += ["nan"] * (2 * (36 + 18 + 18 + 9))
    else:
        for m in (eff.d_bar, eff.s1_bar, eff.s2_bar, eff.rho_bar):
            for v in np.asarray(m, dtype=complex).ravel():
                row += [_fmt(v.real), _fmt(v.imag)]
    res = rec["residuals"]
    keys = ("hermitian_d", "hermitian_rho", "adjoint_s", "energy_imag", "willis_sa")
    row += [_fmt(res[k]) if k in res else "" for k in keys]
    row += [_fmt(rec["rcond"]), _fmt(rec["max_contrast_cond"]),
            f"{rec['wall_ms']:.3f}", rec["message"]]
    return row


def write_results(path, records, deterministic=False):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULT_COLUMNS)
        for rec in records:
            row = _record_row(rec)
            if deterministic:
                row[-2] = "0.000"
            writer.writerow(row)


def write_convergence(path, records):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("index", "n_max_from", "n_max_to", "distance"))
        for rec in records:
            table = rec["convergence"]
            if table is None:
                continue
            for a, b, d in zip(table.n_list, table.n_list[1:], table.distances):
                writer.writerow((rec["index"], a, b, _fmt(d)))


def write_fields(path, snap):
    cols = ["x_m", "y_m", "z_m"]
    for lab in VOIGT_LABELS:
        cols += [f"sigma_{lab}_re_pa", f"sigma_{lab}_im_pa"]
    for ax in AXES:
        cols += [f"v_{ax}_re_m_s", f"v_{ax}_im_m_s"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(cols)
        for p, s, v in zip(snap.points, snap.stress, snap.velocity):
            row = [_fmt(x) for x in p]
            for c in np.concatenate([s, v]):
                row += [_fmt(c.real), _fmt(c.imag)]
            writer.writerow(row)


def read_points(path):
    """Read x,y,z rows [m]; a non-numeric first row is taken as a header."""
    rows = []
    with open(path, newline="") as fh:
        for k, row in enumerate(csv.reader(fh)):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                vals = [float(v) for v in row]
            except ValueError:
                if k == 0:
                    continue
                raise ConfigError(f"non-numeric value in points file {path}", line=k + 1)
            if len(vals) != 3:
                raise ConfigError(f"points file {path} needs 3 columns", line=k + 1)
            rows.append(vals)
    if not rows:
        raise ConfigError(f"points file {path} holds no points")
    return np.array(rows)


def write_report(path, cfg, records, config_path):
    ok = sum(r["status"] == "ok" for r in records)
    lines = [f"dynhom {__version__} run report", f"config: {config_path}",
             f"subregions: {cfg.cell.n_regions}  fill fraction: "
             f"{sum(b.volume for b in cfg.cell.subregions) / cfg.cell.volume:.6g}",
             f"residual tolerance: {cfg.residual_tol:g}",
             f"points: {len(records)}  ok: {ok}  flagged: {len(records) - ok}", ""]
    lines += [f"config warning: {w}" for w in cfg.warnings]
    for rec in records:
        q = ", ".join(f"{v:.6g}" for v in rec["q"])
        lines.append(f"[{rec['index']}] q=({q}) rad/m  omega={rec['omega']:.6g} rad/s  "
                     f"n_max={tuple(rec['n_max'])}  status={rec['status']}")
        for k, v in rec["residuals"].items():
            lines.append(f"    {k:<14s} {v:.3e}")
        if np.isfinite(rec["rcond"]):
            lines.append(f"    rcond          {rec['rcond']:.3e}")
        if rec["convergence"] is not None:
            t = rec["convergence"]
            for a, b, d in zip(t.n_list, t.n_list[1:], t.distances):
                lines.append(f"    drift n_max {a}->{b}: {d:.3e}")
        for w in rec["warnings"]:
            lines.append(f"    warning: {w}")
        if rec["message"]:
            lines.append(f"    {rec['message']}")
    Path(path).write_text("\n".join(lines) + "\n")


def cmd_run(args):
    try:
        cfg = load_config(args.config)
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("--threads must be positive")
            cfg.threads = args.threads
        n_max = cfg.n_max if args.n_max is None else (args.n_max,) * 3
        if args.n_max is not None and args.n_max < 1:
            raise ConfigError("--n-max must be positive")
        points = None
        points_file = args.fields or (cfg.resolve(cfg.points_file) if cfg.points_file else None)
        if points_file is not None:
            points = read_points(points_file)
            if np.any(np.abs(points) > np.array(cfg.cell.half_periods) * (1 + 1e-12)):
                raise ConfigError(f"points in {points_file} fall outside the cell")
        out_dir = Path(args.out_dir) if args.out_dir else cfg.resolve(cfg.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_HARD
    for w in cfg.warnings:
        print(f"warning: {w}", file=sys.stderr)

    sweep = cfg.sweep_points()
    jobs = [(k, q, w) for k, (q, w) in enumerate(sweep)]
    if cfg.threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            records = list(pool.map(lambda j: solve_point(cfg, j[0], j[1], j[2], n_max, points),
                                    jobs))
    else:
        records = [solve_point(cfg, k, q, w, n_max, points) for k, q, w in jobs]

    write_results(out_dir / "results.csv", records, deterministic=args.deterministic)
    write_report(out_dir / "report.txt", cfg, records, args.config)
    if cfg.convergence_n_max:
        write_convergence(out_dir / "convergence.csv", records)
    if points is not None:
        for rec in records:
            if rec["fields"] is not None:
                write_fields(out_dir / f"fields_{rec['index']}.csv", rec["fields"])

    flagged = [r for r in records if r["status"] != "ok"]
    for r in flagged:
        print(f"point {r['index']}: {r['status']}: {r['message']}", file=sys.stderr)
    print(f"{len(records) - len(flagged)}/{len(records)} points ok; output in {out_dir}")
    return EXIT_BREACH if flagged else EXIT_OK


def cmd_check(args):
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_HARD
    if args.emit_normalized:
        sys.stdout.write(emit_normalized(cfg))
        return EXIT_OK
    cell = cfg.cell
    r = cell.n_regions
    fractions = [b.volume / cell.volume for b in cell.subregions]
    n_terms = SpectralGrid(n_max=cfg.n_max, q=cfg.q_list[0],
                           omega=cfg.omega_list[0]).n_terms
    size = 9 * r
    # K, its LU copy and the four block matrices, all complex128
    mem = 16 * (2 * size * size + 2 * (6 * r) ** 2 + 2 * (3 * r) ** 2 + 2 * 18 * r * r)
    print(f"ᾱ={r}, Σf={sum(fractions):.6g}, Γ̂ block {6 * r}×{6 * r}")
    print(f"half periods [m]: {', '.join(f'{a:.6g}' for a in cell.half_periods)}")
    print(f"reference: rho={cell.reference.rho:.6g} kg/m3  lambda={cell.reference.lam:.6g} Pa  "
          f"mu={cell.reference.mu:.6g} Pa")
    for box, f in zip(cell.subregions, fractions):
        print(f"  {box.label:<16s} f={f:.6g}  rho={box.material.rho:.6g}")
    print(f"sweep points: {len(cfg.q_list) * len(cfg.omega_list)}  n_max={tuple(cfg.n_max)}  "
          f"lattice terms: {n_terms}")
    print(f"system size: {size}×{size} complex  (Φ̂ block {3 * r}×{3 * r})  "
          f"memory estimate: {mem / 2**20:.2f} MiB per point")
    for w in cfg.warnings:
        print(f"warning: {w}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dynhom", description="Dynamic effective properties of periodic elastic cells.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="solve every (q, omega) point of a config")
    run.add_argument("config")
    run.add_argument("--n-max", type=int, help="override the lattice truncation (all axes)")
    run.add_argument("--threads", type=int, help="cap on concurrently solved sweep points")
    run.add_argument("--out-dir", help="output directory (overrides the config)")
    run.add_argument("--fields", metavar="POINTS_FILE",
                     help="CSV of x,y,z points for field snapshots")
    run.add_argument("--deterministic", action="store_true",
                     help="write 0 in the wall_ms column so reruns are byte-identical")
    run.set_defaults(func=cmd_run)

    check = sub.add_parser("check", help="validate a config without solving")
    check.add_argument("config")
    check.add_argument("--emit-normalized", action="store_true",
                       help="print the config with every default made explicit")
    check.set_defaults(func=cmd_check)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
