"""Command-line front end.

Every command writes its artifacts into one output directory together with
a MANIFEST (sha256 per file) and a ``checks.json`` holding acceptance
records; ``report`` merges those directories into one acceptance table.

Exit codes: 0 when every executed check passed, 1 when a check failed,
2 for an invalid configuration, 3 for a computation or artifact error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, acceptance, geometry

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_ERROR = 0, 1, 2, 3
OUT_ENV = "BUBBLECLUSTER_OUT"

PLOT_SCRIPT = '''"""Plot every *.plot.dat file in this directory (needs matplotlib).

Each data file has a header line "# x y1 y2 ..." and a scale line
"# scale loglog|linear|semilogy".
"""
import glob

import matplotlib.pyplot as plt
import numpy as np

for path in sorted(glob.glob("*.plot.dat")):
    with open(path) as fh:
        names = fh.readline()[1:].split()
        scale = fh.readline()[1:].split()[1]
    data = np.loadtxt(path, ndmin=2)
    fig, ax = plt.subplots()
    for j in range(1, data.shape[1]):
        ax.plot(data[:, 0], data[:, j], "o-", label=names[j])
    if scale in ("loglog", "semilogy"):
        ax.set_yscale("log")
    if scale == "loglog":
        ax.set_xscale("log")
    ax.set_xlabel(names[0])
    ax.legend()
    fig.savefig(path.replace(".plot.dat", ".png"), dpi=120)
'''


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config and validation
# ---------------------------------------------------------------------------

def read_config(path):
    """Flat ``key = value`` file; ``#`` starts a comment; keys use the long
    flag names with either dashes or underscores."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{n}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = val
    return out


def float_list(text):
    try:
        return [float(s) for s in str(text).split(",") if s.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text}") from exc


def require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def validate(args):
    """Check numeric fields against the preconditions of the modules."""
    from .parameters import check_admissible
    k = getattr(args, "k", None)
    if k is not None:
        require(float(k).is_integer() and k >= 2, f"k must be an integer >= 2 (got {k})")
        args.k = int(k)
        if getattr(args, "eta", "missing") is None:
            args.eta = 2.0 / (args.k - 1.0)
    if getattr(args, "p", None) is not None:
        require(all(p > 1 for p in args.p), "every p must exceed 1")
    if getattr(args, "delta", None) is not None:
        require(0 < args.delta < 1, "delta must lie in (0, 1)")
    eta = getattr(args, "eta", None)
    if eta is not None and k is not None:
        require(eta > 0, "eta must be positive")
        adm = check_admissible(args.k, eta)
        require(adm["ok"], f"eta={eta} is not admissible for k={args.k} (margins {adm['margins']})")
    if getattr(args, "steps", None) is not None:
        require(args.steps >= 1, "steps must be at least 1")
    if getattr(args, "p0", None) is not None:
        require(args.p0 > 1 and args.p1 > 1, "p0 and p1 must exceed 1")
    if getattr(args, "eta_band", None) is not None:
        require(0 < args.eta_band < 0.5, "eta-band must lie in (0, 0.5)")


def load_domain(args):
    if getattr(args, "domain", None):
        try:
            dom = geometry.domain_from_json(args.domain, k_sym=args.k)
        except (OSError, KeyError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read domain file {args.domain}: {exc}") from exc
        require(dom.k_sym == args.k, f"domain k_sym={dom.k_sym} does not match k={args.k}")
        return dom
    return geometry.disk(1.0, args.k)


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------

class RunDir:
    """Output directory with a manifest of everything written."""

    def __init__(self, path, command, config):
        self.path = Path(path)
        self.path.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.config = config
        self.files = []
        self.checks = []

    def _track(self, name):
        if name not in self.files:
            self.files.append(name)
        return self.path / name

    def write_csv(self, name, rows, columns=None):
        if columns is None:
            columns = list(rows[0].keys()) if rows else []
        with open(self._track(name), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for r in rows:
                w.writerow([_cell(r.get(c)) for c in columns])

    def write_json(self, name, obj):
        with open(self._track(name), "w", encoding="utf-8") as fh:
            json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_plot(self, name, x, ys, names, scale="linear"):
        cols = np.column_stack([x] + list(ys))
        with open(self._track(name + ".plot.dat"), "w", encoding="utf-8") as fh:
            fh.write("# " + " ".join(names) + "\n")
            fh.write(f"# scale {scale}\n")
            np.savetxt(fh, cols, fmt="%.12e")
        if "plot.py" not in self.files:
            (self._track("plot.py")).write_text(PLOT_SCRIPT, encoding="utf-8")

    def add_check(self, rec):
        self.checks.append(rec)

    def finalize(self, partial=False, error=None):
        self.write_json("checks.json", self.checks)
        entries = {name: sha256(self.path / name) for name in sorted(self.files)}
        manifest = {"command": self.command, "version": __version__, "config": self.config,
                    "partial": partial, "error": error, "files": entries}
        with open(self.path / "MANIFEST", "w", encoding="utf-8") as fh:
            json.dump(_jsonable(manifest), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return all(c["passed"] for c in self.checks)


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_constants(args, run):
    from .parameters import find_k0, limit_constants
    if args.k0:
        k0 = find_k0()
        out = {"k0": k0}
        run.add_check(acceptance.record(2, {"k0": k0}))
    else:
        out = limit_constants(args.k).to_dict()
    run.write_json("constants.json", out)
    print(json.dumps(_jsonable(out), sort_keys=True))


def cmd_params(args, run):
    from .parameters import solve_parameter_system
    dom = load_domain(args)
    rows = []
    for p in args.p:
        s = solve_parameter_system(args.k, p, args.eta, robin_00=dom.robin_00)
        d = s.to_dict()
        d["tau_p"] = s.tau * p
        d["max_residual"] = float(s.residuals().max())
        rows.append(d)
    run.write_csv("params.csv", rows)
    if args.acceptance:
        run.add_check(acceptance.criterion_3())
        run.add_check(acceptance.criterion_9(seed=args.seed))


def cmd_profiles(args, run):
    from .radial_profiles import C1_EXACT, log_coefficient_by_integral, solve_correction_profile
    t = time.perf_counter()
    V0 = solve_correction_profile(1, r_max=args.r_max, tol=args.tol)
    quad = log_coefficient_by_integral(1)
    rt = time.perf_counter() - t
    if args.normalize == "far-field":
        V = V0.with_offset(-V0.far_const)
    else:
        V = V0
    W = solve_correction_profile(2, r_max=args.r_max, tol=args.tol, v_profile=V)
    if args.normalize == "far-field":
        W = W.with_offset(-W.far_const)
    V.to_csv(run._track("V.csv"))
    run._track("V.csv.json")
    W.to_csv(run._track("W.csv"))
    run._track("W.csv.json")
    summary = {"C1_fit": V.log_coeff, "C1_quadrature": quad, "C1_closed_form": C1_EXACT,
               "C2_fit": W.log_coeff, "C2_quadrature": log_coefficient_by_integral(2, V),
               "V_far_const": V.far_const, "W_far_const": W.far_const,
               "V_ode_residual": V.ode_residual(), "W_ode_residual": W.ode_residual(V),
               "normalize": args.normalize}
    run.write_json("profiles.json", summary)
    run.add_check(acceptance.record(1, {"fit": V.log_coeff, "quad": quad, "closed_form": C1_EXACT,
                                        "fit_rel": abs(V.log_coeff / C1_EXACT - 1),
                                        "quad_rel": abs(quad / C1_EXACT - 1), "runtime": rt}))


def _sweep_job(job):
    from .ansatz import error_norm, make_ansatz
    k, p, eta, dom_json, delta, offsets = job
    from .ansatz import default_profiles
    V, W = default_profiles(*offsets)
    f = make_ansatz(k, p, eta, geometry.domain_from_json(dom_json), V, W, delta=delta)
    return error_norm(f)


def cmd_error_sweep(args, run):
    from .ansatz import calibrate_offsets, default_profiles, loglog_slope
    dom = load_domain(args)
    t = time.perf_counter()
    if args.calibrate == "optimize":
        cal = calibrate_offsets(args.k, args.eta, args.p, dom=dom, delta=args.delta)
        V, W = cal["profiles"]
    elif args.calibrate == "far-field":
        V, W = default_profiles()
    else:
        V, W = default_profiles(0.0, 0.0)
    tables = {}
    for label, offs in (("calibrated", (V.offset, W.offset)), ("uncalibrated", (0.0, 0.0))):
        if label == "uncalibrated" and args.calibrate == "none":
            continue
        jobs = [(args.k, p, args.eta, dom.to_json(), args.delta, offs) for p in args.p]
        if args.workers > 1:
            with ProcessPoolExecutor(args.workers) as ex:
                res = list(ex.map(_sweep_job, jobs))
        else:
            res = [_sweep_job(j) for j in jobs]
        tables[label] = res
    main = tables.get("calibrated") or tables.get("uncalibrated")
    slope = loglog_slope(args.p, [r["norm"] for r in main])
    rows = [{"p": p, "norm": r["norm"], "slope": slope, "region_of_max": r["zone"],
             "origin_max": r["per_zone"]["origin"], "ring_max": r["per_zone"]["ring"],
             "background_max": r["per_zone"]["background"]} for p, r in zip(args.p, main)]
    run.write_csv("error_sweep.csv", rows)
    ys, names = [[r["norm"] for r in main]], ["p", "norm"]
    summary = {"slope": slope, "offsets": [V.offset, W.offset], "calibrate": args.calibrate}
    unc_slope = None
    if "uncalibrated" in tables and args.calibrate != "none":
        unc = tables["uncalibrated"]
        unc_slope = loglog_slope(args.p, [r["norm"] for r in unc])
        ys.append([r["norm"] for r in unc])
        names.append("norm_uncalibrated")
        summary["slope_uncalibrated"] = unc_slope
    run.write_plot("error_sweep", args.p, ys, names, scale="loglog")
    run.write_json("error_sweep.json", summary)
    rt = time.perf_counter() - t
    if args.k == 4 and abs(args.eta - 2 / 3) < 1e-3 and dom.is_disk and dom.radius == 1.0:
        run.add_check(acceptance.record(5, {"slope_calibrated": slope, "slope_uncalibrated": unc_slope,
                                            "runtime": rt}))


def cmd_linear_probe(args, run):
    from .ansatz import make_ansatz
    from .linearized import stability_probe, ztilde_energy
    dom = load_domain(args)
    probe = stability_probe(args.k, args.eta, args.p, dom=dom, delta=args.delta)
    rows = [dict(r, slope=probe["slope"]) for r in probe["rows"]]
    run.write_csv("linear_probe.csv", rows, ["p", "gain", "ztilde_energy", "sigma_min", "slope"])
    run.write_plot("gain", args.p, [[r["gain"] for r in rows]], ["p", "gain"], scale="loglog")
    ze = ztilde_energy(make_ansatz(args.k, args.ztilde_p, args.eta, dom))
    summary = {"gain_slope": probe["slope"], "ztilde_energy": ze, "ztilde_p": args.ztilde_p,
               "target_8kpi_over_3": 8 * args.k * np.pi / 3,
               "limit_32kpi_over_3": 32 * args.k * np.pi / 3}
    run.write_json("linear_probe.json", summary)
    target = 8 * args.k * np.pi / 3
    run.add_check(acceptance.record(6, {"ztilde_energy": ze, "ztilde_rel_dev": abs(ze / target - 1),
                                        "gain_slope": probe["slope"]}))
    if args.fixed_point:
        run.add_check(acceptance.criterion_7(tuple(args.fixed_point)))


def cmd_reduce(args, run):
    from .reduced_energy import (energy_curve, eta_grid, minimize_phi, phi_identity_defect,
                                 prefactor_report)
    etas = eta_grid(args.k, args.eta_band, args.n_eta)
    curve = energy_curve(args.k, args.p, etas=etas, dom=load_domain(args), use_phi=args.use_phi)
    rows = curve.rows()
    run.write_csv("reduce.csv", rows)
    ys = [curve.phi] + [args_p * curve.F[args_p] for args_p in args.p]
    run.write_plot("reduce", curve.eta, ys, ["eta", "phi_k"] + [f"pF_p{p:g}" for p in args.p])
    summary = {"k": args.k, "phi_argmin": minimize_phi(args.k),
               "F_argmin": {f"{p:g}": curve.argmin[p] for p in args.p},
               "prefactor": {f"{p:g}": v for p, v in prefactor_report(curve).items()},
               "identity_defect": phi_identity_defect(args.k)}
    run.write_json("reduce.json", summary)
    run.add_check(acceptance.criterion_4())


def cmd_solve(args, run):
    from .pde_solver import continuation
    dom = load_domain(args)
    require(dom.is_disk, "solve needs a disk domain")
    res = continuation(args.k, args.eta, args.p0, args.p1, args.steps, dom=dom)
    rows = []
    for i, s in enumerate(res["solutions"]):
        d = s.diagnostics
        run.write_json(f"step{i:02d}.json", d)
        rows.append({c: d[c] for c in ("p", "u0", "u_min", "ring_radius", "E_plus", "E_minus",
                                         "E_plus_ratio", "E_minus_ratio", "iterations",
                                         "newton_residual")})
    run.write_csv("energies.csv", rows)
    run.write_plot("energies", [r["p"] for r in rows],
                   [[r["E_plus_ratio"] for r in rows], [r["E_minus_ratio"] for r in rows]],
                   ["p", "E_plus_ratio", "E_minus_ratio"])
    last = res["solutions"][-1]
    g = last.grid
    polar = g.to_polar(last.u)
    rr, tt = np.meshgrid(g.r, g.theta, indexing="ij")
    field_rows = [{"r": a, "theta": b, "u": c} for a, b, c in zip(rr.ravel(), tt.ravel(), polar.ravel())]
    run.write_csv("field_last.csv", field_rows, ["r", "theta", "u"])
    run.write_json("continuation.json", {"completed": res["completed"], "events": res["events"]})
    if not res["completed"]:
        raise RuntimeError("continuation aborted; see continuation.json")


def cmd_report(args, run):
    report = build_report(args.run_dirs)
    run.write_json("report.json", report)
    lines = ["| criterion | title | status | measured |", "|---|---|---|---|"]
    for r in report["criteria"]:
        m = ", ".join(f"{k}={acceptance._fmt(v)}" for k, v in r["measured"].items()
                      if not isinstance(v, (list, dict)))
        lines.append(f"| {r['id']} | {r['title']} | {'pass' if r['passed'] else 'FAIL'} | {m} |")
    text = "\n".join(lines) + "\n"
    (run._track("report.md")).write_text(text, encoding="utf-8")
    print(text, end="")
    for r in report["criteria"]:
        run.add_check(r)


def build_report(run_dirs):
    """Verify manifests and re-judge every stored acceptance record.

    Raises
    ------
    ValueError
        For a missing manifest, missing file or hash mismatch (names the file).
    """
    merged = {}
    for d in run_dirs:
        d = Path(d)
        man_path = d / "MANIFEST"
        if not man_path.exists():
            raise ValueError(f"missing MANIFEST in {d}")
        man = json.loads(man_path.read_text(encoding="utf-8"))
        for name, digest in man["files"].items():
            f = d / name
            if not f.exists():
                raise ValueError(f"missing artifact {f}")
            if sha256(f) != digest:
                raise ValueError(f"hash mismatch for {f}")
        checks = json.loads((d / "checks.json").read_text(encoding="utf-8"))
        for c in checks:
            rec = acceptance.record(int(c["id"]), c["measured"])
            merged[rec["id"]] = rec
    crit = [merged[k] for k in sorted(merged)]
    return {"criteria": crit, "evaluated": len(crit), "passed": sum(c["passed"] for c in crit)}


COMMANDS = {"constants": cmd_constants, "params": cmd_params, "profiles": cmd_profiles,
            "error-sweep": cmd_error_sweep, "ansatz-error": cmd_error_sweep,
            "linear-probe": cmd_linear_probe, "reduce": cmd_reduce, "solve": cmd_solve,
            "report": cmd_report}


def build_parser():
    ap = argparse.ArgumentParser(prog="bubblecluster", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, k=True, eta=True):
        p.add_argument("--config", help="key = value file; flags override it")
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV}/<command> or runs/<command>)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=int, default=1)
        if k:
            p.add_argument("--k", type=float, default=4)
        if eta:
            p.add_argument("--eta", type=float, default=None)
        p.add_argument("--domain", help="domain JSON file")

    p = sub.add_parser("constants", help="limit constants for k, or k0")
    common(p, eta=False)
    p.add_argument("--k0", action="store_true")

    p = sub.add_parser("params", help="solve the parameter system")
    common(p)
    p.add_argument("--p", type=float_list, default=[10, 100, 1000, 10000])
    p.add_argument("--acceptance", action="store_true", help="also run the parameter and Taylor checks")

    p = sub.add_parser("profiles", help="build the correction profiles")
    common(p, k=False, eta=False)
    p.add_argument("--r-max", type=float, default=1e4)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--normalize", choices=["origin", "far-field"], default="origin")

    for name in ("error-sweep", "ansatz-error"):
        p = sub.add_parser(name, help="weighted error norm along p")
        common(p)
        p.add_argument("--p", type=float_list, default=[20, 40, 80, 160])
        p.add_argument("--delta", type=float, default=0.1)
        p.add_argument("--calibrate", choices=["optimize", "far-field", "none"], default="far-field")

    p = sub.add_parser("linear-probe", help="stability gain of the projected linear solve")
    common(p)
    p.add_argument("--p", type=float_list, default=[20, 40, 80])
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--ztilde-p", type=float, default=100.0)
    p.add_argument("--fixed-point", type=float_list, default=None,
                   help="also run the contraction map at these p")

    p = sub.add_parser("reduce", help="reduced energy along eta")
    common(p, eta=False)
    p.add_argument("--p", type=float_list, default=[40, 80])
    p.add_argument("--eta-band", type=float, default=0.1)
    p.add_argument("--n-eta", type=int, default=41)
    p.add_argument("--use-phi", action="store_true")

    p = sub.add_parser("solve", help="Newton continuation of the cluster branch")
    common(p)
    p.add_argument("--p0", type=float, default=40)
    p.add_argument("--p1", type=float, default=80)
    p.add_argument("--steps", type=int, default=8)

    p = sub.add_parser("report", help="merge run directories into an acceptance table")
    p.add_argument("run_dirs", nargs="*")
    p.add_argument("--out", help="output directory")
    p.add_argument("--config")
    p.add_argument("--seed", type=int, default=0)
    return ap


def parse(argv):
    ap = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "config", None):
        cfg = read_config(args.config)
        sub = ap._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions}
        defaults = {}
        for key, val in cfg.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r} for {args.command}")
            act = known[key]
            if act.type is not None:
                defaults[key] = act.type(val)
            elif isinstance(act, argparse._StoreTrueAction):
                defaults[key] = val.lower() in ("1", "true", "yes", "on")
            else:
                defaults[key] = val
        sub.set_defaults(**defaults)
        args = ap.parse_args(argv)
    return args


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse(argv)
        validate(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    np.random.seed(args.seed)
    out = args.out or os.path.join(os.environ.get(OUT_ENV, "runs"), args.command)
    config = {k: v for k, v in vars(args).items() if k not in ("out",)}
    run = RunDir(out, args.command, config)
    try:
        COMMANDS[args.command](args, run)
    except ConfigError as exc:
        run.finalize(partial=True, error=str(exc))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, RuntimeError, np.linalg.LinAlgError, OSError) as exc:
        run.finalize(partial=True, error=str(exc))
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    ok = run.finalize()
    for c in run.checks:
        print(acceptance.format_line(c))
    return EXIT_OK if ok else EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
