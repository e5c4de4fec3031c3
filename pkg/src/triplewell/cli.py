"""Command-line front end.

Every run writes its data files, an effective ``config.json`` that re-runs it
exactly (``--config``), and a ``metadata.json`` carrying the timestamp and
build information.  Data files never contain wall-clock content.

Exit codes: 0 success, 2 usage error, 3 numerical non-convergence,
4 chart overflow.
"""
from __future__ import annotations

import argparse
import cmath
import datetime as _dt
import json
import math
import subprocess
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .classical import (
    ChartOverflowError,
    ClassicalState,
    classical_energy,
    from_sphere,
    integrate,
    sphere_coords,
    to_canonical,
)
from .equilibria import find_fixed_points, stability_map
from .model import ModelParams, TrapGeometry, derive_collision_rates, fock_basis, build_hamiltonian, params_from_rates
from .presets import get_preset
from .quantum import ConvergenceError, coherent_state, fock_state, operator_set, propagate, time_series, write_time_series
from .sections import (
    CHART_COORDS,
    SectionSpec,
    coordinate,
    energy_shell_seed,
    poincare_section,
)

EXIT_USAGE, EXIT_NONCONVERGED, EXIT_OVERFLOW = 2, 3, 4
DEFAULT_N_CAP = 200
SHELL_ANCHORS = {
    "sdw": (complex(-1.0, 0.0), complex(0.0, 0.0)),
    "vortex": (cmath.exp(2j * math.pi / 3), cmath.exp(-2j * math.pi / 3)),
}


class UsageError(ValueError):
    """Invalid command-line request (exit code 2)."""


class NonConvergenceError(RuntimeError):
    """An integration finished but failed its audit (exit code 3)."""


# ---------------------------------------------------------------------------
# helpers


def _model(p: Dict) -> ModelParams:
    return ModelParams(omega=float(p["omega"]), n_particles=int(p["n"]), chi=float(p["chi"]), mu=float(p["mu"]))


def _parse_complex(text: str) -> complex:
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise UsageError(f"cannot parse complex number {text!r}") from None


def _git_describe() -> Optional[str]:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], capture_output=True, text=True,
                             cwd=Path(__file__).resolve().parent, timeout=5)
    except (OSError, subprocess.SubprocessError):
        return None
    return out.stdout.strip() or None


def resolve_seeds(params: ModelParams, seeding: Dict, n_seeds: Optional[int] = None):
    """Seeds on the shell of a named anchor state, optionally reduced to the root nearest a target."""
    anchor = ClassicalState(*SHELL_ANCHORS[seeding["shell"]])
    e_shell = classical_energy(anchor, params)
    result = energy_shell_seed(params, e_shell, seeding["chart"], seeding["frozen"], n_seeds=n_seeds)
    seeds = result.seeds
    nearest = seeding.get("nearest")
    if nearest and seeds:
        (name, target), = nearest.items()
        n = params.n_particles
        seeds = [min(seeds, key=lambda s: abs(coordinate(s.as_array(), name, n) - target))]
    return seeds, result, e_shell


def _initial_state(params: ModelParams, initial: Dict):
    """(classical state or None, quantum state or None) for an ``initial`` option block."""
    if "fock" in initial:
        occ = tuple(int(x) for x in initial["fock"])
        return None, fock_state(fock_basis(params.n_particles), occ)
    if "seed" in initial:
        seeds, _, _ = resolve_seeds(params, initial["seed"])
        if not seeds:
            raise UsageError("no initial condition found on the requested energy shell")
        st = seeds[0]
    else:
        w1, w2 = (_parse_complex(str(x)) for x in initial["w"])
        st = ClassicalState(w1, w2)
    return st, None


# ---------------------------------------------------------------------------
# commands (each takes a run dict and an output directory, returns written paths)


def run_params(run: Dict, out: Path) -> List[Path]:
    opts = run["options"]
    report: Dict[str, object] = {}
    geo = None
    if opts.get("geometry"):
        geo = TrapGeometry(**opts["geometry"])
        eps, kappa, lam = derive_collision_rates(geo)
        params = params_from_rates(run["params"]["omega"], kappa, lam, run["params"]["n"])
        report.update(epsilon=eps)
    elif opts.get("kappa") is not None:
        params = params_from_rates(run["params"]["omega"], opts["kappa"], opts["lam"], run["params"]["n"])
    else:
        params = _model(run["params"])
    report.update(omega=params.omega, n=params.n_particles, chi=params.chi, mu=params.mu,
                  kappa=params.kappa, lam=params.lam, omega_eff=params.omega_eff, physical=params.physical)
    for k, v in report.items():
        print(f"{k} = {v!r}")
    path = out / "params.cfg"
    path.write_text(params.to_config(geo))
    return [path]


def _numeric_lambda_squared(eigenvalues) -> List[complex]:
    """One lambda^2 per +-lambda pair of a Hamiltonian linearization."""
    sq = sorted((complex(z) ** 2 for z in eigenvalues), key=lambda z: (round(z.real, 9), round(z.imag, 9)))
    return sq[::2]


def run_fixed_points(run: Dict, out: Path) -> List[Path]:
    params = _model(run["params"])
    n = params.n_particles
    records = find_fixed_points(params)
    path = out / "fixed_points.csv"
    lines = ["class,re_w1,im_w1,re_w2,im_w2,K1,K2,phi1,phi2,lambda_squared,lambda_source,verdict,stability"]
    print(f"{'class':<13}{'w1':>26}{'w2':>26}{'K1':>9}{'K2':>9}  verdict")
    for r in records:
        c = to_canonical(r.state, n)
        if r.lambda_squared is not None:
            values, source = list(r.lambda_squared), "closed"
        else:
            values, source = _numeric_lambda_squared(r.eigenvalues), "numeric"
        lam2 = ";".join(f"{float(z.real)!r}{float(z.imag):+.17g}j" for z in values)
        stab = {"stable": 1, "unstable": 0}.get(r.verdict, 2)
        lines.append(f"{r.kind},{float(r.state.w1.real)!r},{float(r.state.w1.imag)!r},{float(r.state.w2.real)!r},{float(r.state.w2.imag)!r},"
                     f"{float(c.K1)!r},{float(c.K2)!r},{float(c.phi1)!r},{float(c.phi2)!r},{lam2},{source},{r.verdict},{stab}")
        print(f"{r.kind:<13}{r.state.w1:>26.10g}{r.state.w2:>26.10g}{c.K1:>9.4f}{c.K2:>9.4f}  {r.verdict}")
        print(f"{'':<13}lambda^2 ({source}) = " + ", ".join(f"{z.real:.6g}{z.imag:+.3g}j" for z in values))
    path.write_text("\n".join(lines) + "\n")
    return [path]


def run_stability_map(run: Dict, out: Path, workers: int = 1) -> List[Path]:
    opts = run["options"]
    (clo, chi_hi, cn), (mlo, mhi, mn) = opts["chi_range"], opts["mu_range"]
    if int(cn) < 2 or int(mn) < 2:
        raise UsageError("stability map needs at least 2 grid points per axis")
    chi = np.linspace(clo, chi_hi, int(cn))
    mu = np.linspace(mlo, mhi, int(mn))
    smap = stability_map(chi, mu, omega=run["params"]["omega"], workers=workers)
    path = out / "stability_map.csv"
    smap.to_csv(path)
    return [path]


def run_evolve(run: Dict, out: Path, n_cap: int = DEFAULT_N_CAP) -> List[Path]:
    params = _model(run["params"])
    opts = run["options"]
    mode = opts["mode"]
    if mode not in ("classical", "quantum", "both"):
        raise UsageError(f"mode must be classical, quantum or both, got {mode!r}")
    if mode != "classical" and params.n_particles > n_cap:
        dim = (params.n_particles + 1) * (params.n_particles + 2) // 2
        raise UsageError(f"quantum mode with N={params.n_particles} exceeds the cap of {n_cap} "
                         f"(Fock dimension {dim}); raise --n-cap if the memory is available")
    st, qst = _initial_state(params, opts["initial"])
    if st is None and mode != "quantum":
        raise UsageError("a Fock-state initial condition is only valid in quantum mode")
    label = run["label"]
    written = []
    t_end, dt = float(opts["t_end"]), float(opts["sample_dt"])
    rel_tol = opts.get("rel_tol")
    if mode in ("classical", "both"):
        kw = {} if rel_tol is None else {"rel_tol": rel_tol}
        traj = integrate(st, params, t_end, sample_dt=dt, **kw)
        path = out / f"{label}_classical.csv"
        traj.to_csv(path)
        written.append(path)
        if not traj.converged:
            raise NonConvergenceError(f"classical energy drift {traj.max_energy_drift:.3g} exceeds the audit bound")
    if mode in ("quantum", "both"):
        if qst is None:
            qst = coherent_state(params.n_particles, st.w1, st.w2)
        basis = qst.basis
        kw = {} if rel_tol is None else {"rel_tol": rel_tol}
        prop = propagate(qst, build_hamiltonian(params, basis), t_end, sample_dt=dt, **kw)
        path = out / f"{label}_quantum.csv"
        write_time_series(time_series(prop, operator_set(basis, params)), path)
        written.append(path)
        if not prop.converged:
            raise NonConvergenceError(
                f"quantum propagation drift (norm {prop.max_norm_drift:.3g}, energy {prop.max_energy_drift:.3g}) "
                "exceeds 1e-8")
    return written


def run_sphere_portrait(run: Dict, out: Path) -> List[Path]:
    params = _model(run["params"])
    opts = run["options"]
    seeds = []
    for w in opts.get("seeds", []):
        st = ClassicalState(_parse_complex(str(w[0])), _parse_complex(str(w[1])))
        sphere_coords(st)  # raises for non-twin seeds
        seeds.append(st)
    for phi in opts.get("phi", []):
        for theta in opts.get("theta", []):
            seeds.append(from_sphere(float(theta), float(phi)))
    if not seeds:
        raise UsageError("sphere portrait needs at least one seed")
    label = run["label"]
    path = out / f"{label}_sphere.csv"
    with open(path, "w") as fh:
        fh.write("trajectory_id,t,theta,phi,Ix,Iy,Iz\n")
        for tid, st in enumerate(seeds):
            kw = {} if opts.get("rel_tol") is None else {"rel_tol": opts["rel_tol"]}
            traj = integrate(st, params, float(opts["t_end"]), sample_dt=float(opts["sample_dt"]), **kw)
            for t, s in zip(traj.times, traj.states):
                sp_ = sphere_coords(s)
                fh.write(f"{tid},{float(t)!r},{float(sp_.theta)!r},{float(sp_.phi)!r},{float(sp_.I[0])!r},{float(sp_.I[1])!r},{float(sp_.I[2])!r}\n")
    markers = out / f"{label}_markers.csv"
    with open(markers, "w") as fh:
        fh.write("class,theta,phi,Ix,Iy,Iz,verdict,stability\n")
        for r in find_fixed_points(params):
            if abs(r.state.w1 - r.state.w2) > 1e-9:
                continue
            sp_ = sphere_coords(r.state)
            code = {"stable": 1, "unstable": 0}.get(r.verdict, 2)
            fh.write(f"{r.kind},{float(sp_.theta)!r},{float(sp_.phi)!r},{float(sp_.I[0])!r},{float(sp_.I[1])!r},{float(sp_.I[2])!r},{r.verdict},{code}\n")
    return [path, markers]


def run_poincare(run: Dict, out: Path, workers: int = 1) -> List[Path]:
    params = _model(run["params"])
    opts = run["options"]
    sec = opts["section"]
    spec = SectionSpec(sec["chart"], (sec["condition"][0], float(sec["condition"][1])), sec.get("direction", "both"),
                       tuple(sec["plane_axes"]))
    seeding = opts["seeding"]
    if seeding["chart"] != spec.chart:
        raise UsageError("seeding chart must match the section chart")
    seeds, seed_report, e_shell = resolve_seeds(params, seeding, opts.get("n_seeds"))
    if not seed_report.in_range:
        lo, hi = seed_report.energy_range
        raise UsageError(f"shell energy {e_shell!r} outside the sampled range [{lo!r}, {hi!r}]")
    kw = {} if opts.get("rel_tol") is None else {"rel_tol": opts["rel_tol"]}
    result = poincare_section(seeds, params, spec, float(sec["t_max"]), workers=workers, **kw)
    label = run["label"]
    path = out / f"{label}_section.csv"
    meta = out / f"{label}_section_meta.json"
    result.to_csv(path, params, meta)
    seed_path = out / f"{label}_seeds.csv"
    n = params.n_particles
    with open(seed_path, "w") as fh:
        names = CHART_COORDS[spec.chart]
        fh.write("trajectory_id," + ",".join(names) + "\n")
        for tid, s in enumerate(seeds):
            y = s.as_array()
            fh.write(f"{tid}," + ",".join(repr(coordinate(y, c, n)) for c in names) + "\n")
    print(f"{len(seeds)} seeds ({seed_report.skipped_cells} grid cells skipped), {len(result.points)} crossings, "
          f"{len(result.truncated)} truncated trajectories")
    return [path, meta, seed_path]


# ---------------------------------------------------------------------------
# argument handling


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--omega", type=float, help="tunneling rate Omega (default -1)")
    p.add_argument("--n", type=int, help="particle number N (default 30)")
    p.add_argument("--chi", type=float, help="self-collision parameter chi (default 0)")
    p.add_argument("--mu", type=float, help="cross-collision parameter mu (default 0)")
    p.add_argument("--preset", help="figure preset id")
    p.add_argument("--config", help="re-run from an emitted config.json")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--rel-tol", type=float, help="integrator relative tolerance")
    p.add_argument("--t-end", type=float, help="final time in units of 1/|Omega|")
    p.add_argument("--sample-dt", type=float, help="sampling interval")
    p.add_argument("--workers", type=int, default=1, help="worker processes for independent cells/trajectories")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="triplewell", description="Triple-well condensate dynamics")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("params", help="convert trap geometry or collision rates to (chi, mu)")
    _common(p)
    for name in ("q0", "d", "omega-trap", "mass", "scattering-length", "V0"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--lam", type=float)

    p = sub.add_parser("fixed-points", help="fixed-point catalog with stability")
    _common(p)

    p = sub.add_parser("stability-map", help="root counts and verdicts over a (chi, mu) grid")
    _common(p)
    p.add_argument("--chi-range", type=float, nargs=3, metavar=("LO", "HI", "COUNT"))
    p.add_argument("--mu-range", type=float, nargs=3, metavar=("LO", "HI", "COUNT"))

    p = sub.add_parser("evolve", help="classical and/or quantum time evolution")
    _common(p)
    p.add_argument("--mode", choices=("classical", "quantum", "both"))
    p.add_argument("--w", nargs=2, metavar=("W1", "W2"), help="initial coherent-state coordinates; wrap negative complex values in parentheses, e.g. '(-0.2+0.1j)'")
    p.add_argument("--fock", nargs=3, type=int, metavar=("N1", "N2", "N3"), help="initial Fock occupations")
    p.add_argument("--n-cap", type=int, default=DEFAULT_N_CAP, help="largest N accepted in quantum mode")

    p = sub.add_parser("sphere-portrait", help="twin-surface trajectories on the sphere")
    _common(p)
    p.add_argument("--seed", nargs=2, action="append", metavar=("W1", "W2"), help="twin seed (repeatable)")
    p.add_argument("--theta", type=float, nargs="+")
    p.add_argument("--phi", type=float, nargs="+")

    p = sub.add_parser("poincare", help="Poincare section on an energy shell")
    _common(p)
    p.add_argument("--t-max", type=float, help="integration time per seed")
    p.add_argument("--n-seeds", type=int)
    return parser


_DEFAULT_OPTIONS = {
    "params": {},
    "fixed-points": {},
    "stability-map": {"chi_range": [-10.0, 10.0, 101], "mu_range": [-0.5, 1.5, 41]},
    "evolve": {"mode": "classical", "initial": {"w": ["0", "0"]}, "t_end": 50.0, "sample_dt": 0.1},
    "sphere-portrait": {"theta": [0.5, 1.0, 1.5, 2.0, 2.5], "phi": [0.0], "t_end": 30.0, "sample_dt": 0.05},
    "poincare": {"seeding": None, "section": None},
}


def config_from_args(args: argparse.Namespace) -> Dict:
    """Effective run configuration (JSON-serializable)."""
    if args.config:
        with open(args.config) as fh:
            cfg = json.load(fh)
        if cfg.get("command") != args.command:
            raise UsageError(f"config is for {cfg.get('command')!r}, not {args.command!r}")
        return cfg
    if args.preset:
        try:
            preset = get_preset(args.preset)
        except KeyError as exc:
            raise UsageError(str(exc)) from None
        if preset["command"] != args.command:
            raise UsageError(f"preset {args.preset!r} belongs to the {preset['command']!r} command")
        runs = preset["runs"]
    else:
        if args.command == "poincare":
            raise UsageError("poincare needs a --preset (fig6a, fig6b, fig9a, fig9b) or a --config")
        runs = [{"label": args.command.replace("-", "_"),
                 "params": {"omega": -1.0, "n": 30, "chi": 0.0, "mu": 0.0},
                 "options": json.loads(json.dumps(_DEFAULT_OPTIONS[args.command]))}]
    for run in runs:
        p, o = run["params"], run["options"]
        for key, val in (("omega", args.omega), ("n", args.n), ("chi", args.chi), ("mu", args.mu)):
            if val is not None:
                p[key] = val
        if args.rel_tol is not None:
            o["rel_tol"] = args.rel_tol
        if args.t_end is not None:
            o["t_end"] = args.t_end
        if args.sample_dt is not None:
            o["sample_dt"] = args.sample_dt
        cmd = args.command
        if cmd == "params":
            geo = {k: getattr(args, k) for k in ("q0", "d", "omega_trap", "mass", "scattering_length", "V0")}
            if any(v is not None for v in geo.values()):
                o["geometry"] = {k: v for k, v in geo.items() if v is not None}
            if args.kappa is not None or args.lam is not None:
                if args.kappa is None or args.lam is None:
                    raise UsageError("--kappa and --lam must be given together")
                o["kappa"], o["lam"] = args.kappa, args.lam
        elif cmd == "stability-map":
            if args.chi_range:
                o["chi_range"] = list(args.chi_range)
            if args.mu_range:
                o["mu_range"] = list(args.mu_range)
        elif cmd == "evolve":
            if args.mode:
                o["mode"] = args.mode
            if args.w and args.fock:
                raise UsageError("give either --w or --fock, not both")
            if args.w:
                o["initial"] = {"w": list(args.w)}
            if args.fock:
                o["initial"] = {"fock": list(args.fock)}
        elif cmd == "sphere-portrait":
            if args.seed:
                o["seeds"] = [list(s) for s in args.seed]
                o["theta"], o["phi"] = [], []
            if args.theta:
                o["theta"] = list(args.theta)
            if args.phi:
                o["phi"] = list(args.phi)
        elif cmd == "poincare":
            if args.t_max is not None:
                o["section"]["t_max"] = args.t_max
            if args.n_seeds is not None:
                o["n_seeds"] = args.n_seeds
    return {"command": args.command, "preset": args.preset, "runs": runs}


def execute(cfg: Dict, out: Path, workers: int = 1, n_cap: int = DEFAULT_N_CAP) -> List[Path]:
    written: List[Path] = []
    for run in cfg["runs"]:
        cmd = cfg["command"]
        if cmd == "params":
            written += run_params(run, out)
        elif cmd == "fixed-points":
            written += run_fixed_points(run, out)
        elif cmd == "stability-map":
            written += run_stability_map(run, out, workers)
        elif cmd == "evolve":
            written += run_evolve(run, out, n_cap)
        elif cmd == "sphere-portrait":
            written += run_sphere_portrait(run, out)
        elif cmd == "poincare":
            written += run_poincare(run, out, workers)
    return written


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = Path(args.out)
    try:
        cfg = config_from_args(args)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")
        written = execute(cfg, out, max(1, args.workers), getattr(args, "n_cap", DEFAULT_N_CAP))
    except (UsageError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NonConvergenceError, ConvergenceError) as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except ChartOverflowError as exc:
        print(f"chart overflow: {exc}", file=sys.stderr)
        return EXIT_OVERFLOW
    meta = {
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "version": __version__,
        "git_describe": _git_describe(),
        "numpy": np.__version__,
        "outputs": sorted(p.name for p in written),
    }
    (out / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    for p in written:
        print(f"wrote {p}")
    return 0
