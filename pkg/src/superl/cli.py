"""Command-line driver.

Subcommands: verify-exact, solve, pohozaev, blowup, classify, report.
Exit status is 0 on success, 1 when a computation fails (for example a
non-converged solve) and 2 for usage or configuration errors. Every run
writes ``manifest.json`` into the output directory.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .grid import ConfigurationError, Domain, DomainError, make_grid
from .fields import CouplingField, ScalarField, SpinorField, residuals

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class ComputationError(Exception):
    pass


# --- config and output helpers -------------------------------------------------------


def read_config(path):
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _floats(text):
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _dump(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if hasattr(o, "to_json"):
        return o.to_json()
    raise TypeError(f"not serializable: {type(o)}")


def _finite(v):
    return v if isinstance(v, (int, str)) or (v is not None and math.isfinite(v)) else None


class Run:
    """Collects outputs and writes the manifest."""

    def __init__(self, args):
        self.args = args
        self.out = Path(args.out)
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise UsageError(f"cannot create output directory {self.out}: {exc}") from exc
        self.files = []
        self.grid = None

    def write(self, name, text):
        p = self.out / name
        p.write_text(text, encoding="utf-8")
        self.files.append(name)
        return p

    def add(self, name):
        self.files.append(name)

    def manifest(self):
        cfg = {k: v for k, v in sorted(vars(self.args).items())
               if k not in ("func", "out", "config") and v is not None}
        canon = json.dumps(cfg, sort_keys=True, default=str)
        man = {"tool": "superl", "version": __version__, "subcommand": self.args.command,
               "config": cfg, "config_hash": hashlib.sha256(canon.encode()).hexdigest(),
               "grid": self.grid.to_json() if self.grid is not None else None,
               "outputs": sorted(set(self.files))}
        (self.out / "manifest.json").write_text(_dump(man), encoding="utf-8")
        return man


def _make_plots(run):
    from . import plots

    if not run.args.plots:
        return False
    if not plots.available():
        print("matplotlib not installed; skipping plots", file=sys.stderr)
        return False
    return True


# --- subcommands ----------------------------------------------------------------------


def _exact_state(case, lam, beta, mu, grid):
    from .exact import conical_bubble, liouville_bubble, yamabe_bubble

    if case == "liouville":
        u, psi = liouville_bubble(lam, (0.0, 0.0), grid)
    elif case == "conical":
        u, psi = conical_bubble(beta, lam, grid), SpinorField.zeros(grid)
    elif case == "yamabe":
        u, psi = yamabe_bubble(lam, mu, (1.0, 0.0), None, (0.0, 0.0), grid)
    else:
        raise UsageError(f"unknown case {case!r}")
    F = CouplingField.const(grid, mu if case == "yamabe" else 0.0)
    return u, psi, F


def cmd_verify_exact(args, run):
    from .diagnostics import local_mass
    from .exact import BubbleParams, bubble_energy

    grid = make_grid(Domain.disk(args.radius), args.h)
    run.grid = grid
    u, psi, F = _exact_state(args.case, args.lam, args.beta, args.mu, grid)
    with np.errstate(invalid="ignore"):
        ru, rp = residuals(u, psi, F)
    keep = grid.interior & (grid.radius_from((0.0, 0.0)) > 2 * grid.h if args.case == "conical" else True)
    res_u = 0.0 if ru is None else float(np.nanmax(np.abs(ru.values[keep])))
    res_p = float(np.max(np.sqrt(np.sum(np.abs(rp.values) ** 2, axis=0))[keep]))
    params = BubbleParams(args.case, args.lam, beta=args.beta, mu=args.mu)
    closed = bubble_energy(params, args.radius)
    e2u = np.nan_to_num(u.exp(2.0))
    result = {
        "case": args.case, "h": args.h, "radius": args.radius, "lambda": args.lam,
        "residual_inf": max(res_u, res_p), "residual_u_inf": res_u, "residual_psi_inf": res_p,
        "mass_B1": local_mass(u, psi, (0.0, 0.0), args.radius),
        "mass_closed_form": closed.mass,
        "e2u_energy": grid.integrate(e2u), "e2u_closed_form": closed.e2u_energy,
        "psi4_energy": grid.integrate(psi.norm2() ** 2), "psi4_closed_form": closed.psi4_energy,
    }
    text = _dump(result)
    run.write("verify.json", text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_solve(args, run):
    from . import fieldio
    from .solver import SolverConfig, SolverError, newton_solve

    if args.input:
        data = fieldio.load_fields(args.input)
        grid = data["grid"]
        u0 = data.get("u")
        psi0 = data.get("psi", SpinorField.zeros(grid))
        if u0 is None or u0.vanished:
            raise UsageError("initial guess needs a non-vanished u")
        bc_u, bc_psi = u0.copy(), psi0.copy()
        exact = None
    else:
        grid = make_grid(Domain.disk(args.radius), args.h)
        if args.case == "liouville":
            u_ex, psi_ex, _ = _exact_state("liouville", args.lam, 0.0, 0.0, grid)
            r2 = grid.x ** 2 + grid.y ** 2
            bump = np.exp(-r2 / (0.25 * args.radius ** 2))
            u0 = ScalarField(grid, u_ex.values * (1 + args.perturb * bump))
            psi0 = psi_ex.copy()
            bc_u, bc_psi, exact = u_ex, psi_ex, u_ex
        elif args.case == "subcritical":
            u0 = ScalarField.constant(grid, 0.0)
            psi0 = SpinorField.zeros(grid)
            bc_u, bc_psi, exact = ScalarField.constant(grid, args.bc_u), SpinorField.zeros(grid), None
        else:
            raise UsageError(f"solve supports --case liouville|subcritical, got {args.case!r}")
    run.grid = grid
    F = CouplingField.const(grid, args.mu)
    cfg = SolverConfig(tol=args.tol, max_iter=args.max_iter)
    try:
        u, psi, report = newton_solve(u0, psi0, F, bc_u, bc_psi, cfg)
    except SolverError as exc:
        raise ComputationError(str(exc)) from exc
    out = report.to_json()
    if exact is not None:
        out["sup_error_u"] = float(np.max(np.abs(u.values - exact.values)[grid.inside]))
    run.write("solve_report.json", _dump(out))
    fieldio.save_fields(run.out / "solution.json", grid, u, psi)
    run.add("solution.json")
    run.add("solution.bin")
    if _make_plots(run):
        from . import plots

        plots.radial_profile(run.out / "solution_profile.svg", grid, u.values)
        run.add("solution_profile.svg")
    sys.stdout.write(_dump(out))
    if not report.converged:
        raise ComputationError(f"solver did not converge: {report.message}")
    return EXIT_OK


def cmd_pohozaev(args, run):
    from . import fieldio
    from .diagnostics import pohozaev_constant

    if args.input:
        data = fieldio.load_fields(args.input)
        grid = data["grid"]
        u = data.get("u") or ScalarField.vanishing(grid)
        psi = data.get("psi", SpinorField.zeros(grid))
        F = CouplingField.const(grid, args.mu)
        closed = None
    else:
        grid = make_grid(Domain.disk(args.radius), args.h)
        u, psi, F = _exact_state(args.case, args.lam, args.beta, args.mu, grid)
        closed = math.pi * args.beta ** 2 if args.case == "conical" else 0.0
    run.grid = grid
    singular = -2 * args.beta if (args.case == "conical" and args.beta < 0 and not args.input) else None
    lines = ["R,C,closed_form"]
    for R in args.radii:
        C = pohozaev_constant(u, psi, F, tuple(args.center), R, singular=singular)
        lines.append(f"{R!r},{C!r},{'' if closed is None else repr(closed)}")
    text = "\n".join(lines) + "\n"
    run.write("pohozaev.csv", text)
    sys.stdout.write(text)
    return EXIT_OK


def _load_spec(arg, n_max=None):
    from . import blowup_lab as bl

    canned = {"liouville": bl.liouville_family, "yamabe": bl.yamabe_family, "mixed": bl.mixed_family}
    if arg in canned:
        spec = canned[arg]()
    else:
        try:
            spec = bl.FamilySpec.from_json(Path(arg).read_text(encoding="utf-8"))
        except (OSError, KeyError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read family spec {arg!r}: {exc}") from exc
    if n_max is not None:
        if n_max < spec.n_range[0]:
            raise UsageError("--n-max below the first index")
        spec.n_range = (spec.n_range[0], n_max)
    return spec


def cmd_blowup(args, run):
    from . import blowup_lab as bl
    from .diagnostics import write_csv

    spec = _load_spec(args.family, args.n_max)
    run.grid = spec.grid
    audit = bl.energy_identity_audit(spec, neck_delta=args.neck_delta, residual_ceiling=args.residual_ceiling)
    run.write("audit.json", _dump(audit.to_json()))
    csv_text = write_csv(audit.csv_rows(), header=bl.CSV_AUDIT_HEADER)
    run.write("audit.csv", csv_text)
    funcs = [b for b in spec.bubbles if b.kind in bl.FUNCTION_KINDS]
    center = funcs[0].center if funcs else spec.bubbles[0].center
    q = bl.quantization_audit(spec, center, args.deltas)
    run.write("quantization.json", _dump(q.to_json()))
    if _make_plots(run):
        from . import plots

        ns = audit.column("n")
        plots.line_plot(run.out / "mass_vs_n.svg", ns, {"local mass": audit.column("mass")}, "n", "mass")
        plots.line_plot(run.out / "neck_vs_n.svg", ns, {"neck remainder": audit.column("neck_remainder")},
                        "n", "energy", logy=True)
        run.add("mass_vs_n.svg")
        run.add("neck_vs_n.svg")
    sys.stdout.write(csv_text)
    return EXIT_OK


def cmd_classify(args, run):
    from . import blowup_lab as bl
    from .diagnostics import brezis_merle_classify, classify_singularity

    if args.canned:
        family = bl.canned_family(args.canned)
    elif args.family:
        spec = _load_spec(args.family)
        family = [bl.generate_family(spec, n) for n in spec.indices]
    else:
        raise UsageError("classify needs --canned or --family")
    if len(family) < 3:
        raise UsageError("classification needs at least 3 family members")
    grid = family[0][0].grid
    run.grid = grid
    probe = Domain.disk(args.probe_radius, tuple(args.center)) if args.probe_radius else None
    bm = brezis_merle_classify(family, args.epsilon1)
    sing = classify_singularity(family, probe, args.threshold)
    out = {"brezis_merle": bm.to_json(), "singularity": sing.to_json()}
    text = _dump(out)
    run.write("classify.json", text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_report(args, run):
    src = Path(args.run_dir)
    man_path = src / "manifest.json"
    if not man_path.exists():
        raise UsageError(f"{src} has no manifest.json")
    man = json.loads(man_path.read_text(encoding="utf-8"))
    lines = [f"# superl run report ({man.get('subcommand')})", "",
             f"- version: {man.get('version')}", f"- config hash: {man.get('config_hash')}"]
    if man.get("grid"):
        g = man["grid"]
        lines.append(f"- grid: {g.get('kind')} h={g.get('h')} nodes={g.get('nx')}x{g.get('ny')}")
    lines.append("")
    for name in man.get("outputs", []):
        p = src / name
        if p.suffix == ".csv" and p.exists():
            rows = p.read_text(encoding="utf-8").strip().splitlines()
            lines += [f"## {name}", "", "| " + " | ".join(rows[0].split(",")) + " |",
                      "|" + "---|" * len(rows[0].split(","))]
            lines += ["| " + " | ".join(r.split(",")) + " |" for r in rows[1:]]
            lines.append("")
        elif p.suffix == ".json" and p.exists() and name != "manifest.json":
            data = json.loads(p.read_text(encoding="utf-8"))
            scalars = {k: v for k, v in data.items() if isinstance(v, (int, float, str, bool))}
            if scalars:
                lines += [f"## {name}", ""] + [f"- {k}: {v}" for k, v in sorted(scalars.items())] + [""]
    audit = src / "audit.csv"
    if _make_plots(run) and audit.exists():
        from . import plots

        rows = [r.split(",") for r in audit.read_text(encoding="utf-8").strip().splitlines()]
        head, body = rows[0], rows[1:]
        col = lambda k: [float(r[head.index(k)]) for r in body]
        plots.line_plot(run.out / "defects.svg", col("n"),
                        {"|defect e2u|": np.abs(col("defect_e2u")) + 1e-300,
                         "|defect psi4|": np.abs(col("defect_psi4")) + 1e-300}, "n", "defect", logy=True)
        run.add("defects.svg")
        lines.append("![defects](defects.svg)")
    run.write("report.md", "\n".join(lines) + "\n")
    return EXIT_OK


# --- parser ---------------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--config", help="key=value config file (flags override it)")
    common.add_argument("--plots", action="store_true", help="emit SVG plots (needs matplotlib)")

    p = argparse.ArgumentParser(prog="superl", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"superl {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def case_args(sp, cases):
        sp.add_argument("--case", choices=cases, default=cases[0])
        sp.add_argument("--lambda", dest="lam", type=float, default=1.0)
        sp.add_argument("--beta", type=float, default=0.0)
        sp.add_argument("--mu", type=float, default=-0.5)
        sp.add_argument("--radius", type=float, default=1.0, help="disk radius of the domain")

    s = sub.add_parser("verify-exact", parents=[common], help="residuals and energies of a catalog bubble")
    case_args(s, ["liouville", "conical", "yamabe"])
    s.add_argument("--h", type=float, default=1 / 128)
    s.set_defaults(func=cmd_verify_exact)

    s = sub.add_parser("solve", parents=[common], help="damped Newton solve")
    case_args(s, ["liouville", "subcritical"])
    s.set_defaults(mu=0.0)
    s.add_argument("--h", type=float, default=1 / 32)
    s.add_argument("--input", help="field file with the initial guess and boundary data")
    s.add_argument("--perturb", type=float, default=0.01)
    s.add_argument("--bc-u", type=float, default=-5.0)
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--max-iter", type=int, default=30)
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("pohozaev", parents=[common], help="Pohozaev constant on several radii")
    case_args(s, ["liouville", "conical", "yamabe"])
    s.add_argument("--h", type=float, default=1 / 256)
    s.add_argument("--radii", type=_floats, default=[0.25, 0.5, 0.75])
    s.add_argument("--center", type=_floats, default=[0.0, 0.0])
    s.add_argument("--input", help="field file instead of a catalog case")
    s.set_defaults(func=cmd_pohozaev)

    s = sub.add_parser("blowup", parents=[common], help="energy-identity and quantization audits")
    s.add_argument("--family", required=True, help="spec JSON file or liouville|yamabe|mixed")
    s.add_argument("--n-max", type=int)
    s.add_argument("--neck-delta", type=float, default=0.25)
    s.add_argument("--residual-ceiling", type=float, default=0.25,
                   help="rows above this relative residual are flagged as uncertified")
    s.add_argument("--deltas", type=_floats, default=[0.5, 0.25, 0.125])
    s.set_defaults(func=cmd_blowup)

    s = sub.add_parser("classify", parents=[common], help="singularity and Brezis-Merle classification")
    s.add_argument("--canned", choices=["bm-a", "bm-b", "bm-c", "sing-first", "sing-second", "sing-mixed"])
    s.add_argument("--family", help="spec JSON file or liouville|yamabe|mixed")
    s.add_argument("--epsilon1", type=float, default=0.1)
    s.add_argument("--threshold", type=float, default=10.0)
    s.add_argument("--probe-radius", type=float)
    s.add_argument("--center", type=_floats, default=[0.0, 0.0])
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("report", parents=[common], help="summarize a run directory")
    s.add_argument("--run-dir", required=True)
    s.set_defaults(func=cmd_report)
    return p


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    cfg = read_config(known.config)
    cmd = next((a for a in argv if not a.startswith("-")), None)
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    sp = subparsers.choices.get(cmd)
    if sp is None:
        return
    dests = {a.dest: a for a in sp._actions}
    for k, v in cfg.items():
        if k not in dests:
            raise UsageError(f"unknown config key {k!r} for {cmd}")
        action = dests[k]
        if isinstance(action, argparse._StoreTrueAction):
            v = v.lower() in ("1", "true", "yes", "on")
        sp.set_defaults(**{k: v})


def run(argv=None):
    """Execute the CLI; returns the exit status."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (UsageError, OSError) as exc:
        print(f"superl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        r = Run(args)
        code = args.func(args, r)
        r.manifest()
        return code
    except (UsageError, ConfigurationError) as exc:
        print(f"superl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ComputationError, DomainError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"superl: computation failed: {exc}", file=sys.stderr)
        try:
            r.manifest()
        except Exception:
            pass
        return EXIT_FAIL
    except ValueError as exc:
        print(f"superl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
