"""Command-line front end.

Every data subcommand writes one table (CSV by default) plus a
``manifest.json`` next to it that records everything needed to rerun it.
"""

from __future__ import annotations

import argparse
import math
import os
import re
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .disorder import EnsembleSpec, ensemble_spectrum, splitting_curve
from .floquet import CouplingDriveSpec, LocalDriveSpec, coupling_drive_map, local_drive_map
from .greens import GreenError, coherence_lengths, finite_green
from .io import write_json, write_table
from .model import ModelParams, build_dynamical_matrix, build_pump_matrix, load_config
from .observables import NOISE_CAP, added_noise, quadrature_state, semi_infinite_gain, semi_infinite_noise
from .spectral import ZERO_MODE_THRESHOLD, singular_spectrum, stability_report, zero_mode_census
from .topology import SENTINEL, PhaseDiagramGrid, SweepSpec, phase_diagram

AMPLIFIER_COLUMNS = ("omega", "site", "gain", "n_amp", "n_add", "n_add_capped_flag")
SQUEEZING_COLUMNS = (
    "omega", "site", "theta", "var_x", "var_p", "mean_x_re", "mean_x_im", "mean_p_re", "mean_p_im", "class",
)
SPECTRUM_COLUMNS = ("omega", "index", "singular_value")
ENSEMBLE_COLUMNS = ("strength", "realization", "min_sv", "second_sv")
SPLITTING_COLUMNS = ("strength", "lowest_mean", "lowest_stderr", "second_mean", "second_stderr", "n_ok")
COHERENCE_COLUMNS = ("omega", "re_zeta_plus", "im_zeta_plus", "re_zeta_minus", "im_zeta_minus", "converged")

NUMERIC_PARAMS = tuple(f.name for f in fields(ModelParams) if f.name != "energy_scale")


class UsageError(Exception):
    """Bad command-line input; exits with status 2."""


class ComputationError(Exception):
    """A grid point failed; exits with status 1."""


def parse_grid(text: str) -> np.ndarray:
    """``start:stop:num`` -> uniform grid; a bare number gives a single point."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return np.array([float(parts[0])])
        if len(parts) == 3:
            start, stop, num = float(parts[0]), float(parts[1]), int(parts[2])
            if num < 1:
                raise ValueError
            return np.linspace(start, stop, num)
    except ValueError:
        pass
    raise UsageError(f"grid must be start:stop:num or a number, got {text!r}")


def parse_list(text: str, kind=float) -> list:
    try:
        return [kind(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated list, got {text!r}") from None


def parse_param_sweep(text: str) -> tuple[str, np.ndarray]:
    name, _, grid = text.partition(":")
    if name not in NUMERIC_PARAMS:
        raise UsageError(f"cannot sweep {name!r}; choose from {NUMERIC_PARAMS}")
    values = parse_grid(grid)
    if name == "n_sites":
        values = np.unique(np.round(values).astype(int))
    return name, values


def _resolve_threads(value: int | None) -> int:
    if value is not None:
        return max(1, value)
    env = os.environ.get("TWPA_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"TWPA_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _load_params(args) -> tuple[ModelParams, str]:
    try:
        if args.config:
            params, boundary = load_config(args.config)
        else:
            params, boundary = ModelParams(), "open"
        overrides = {}
        for item in args.set or []:
            key, sep, value = item.partition("=")
            if not sep:
                raise ValueError(f"--set expects key=value, got {item!r}")
            if key == "boundary":
                boundary = value
                continue
            if key not in NUMERIC_PARAMS:
                raise ValueError(f"unknown parameter {key!r}")
            overrides[key] = int(value) if key == "n_sites" else float(value)
        if overrides:
            params = params.replace(**overrides)
        if boundary not in ("open", "periodic"):
            raise ValueError(f"boundary must be open or periodic, got {boundary!r}")
    except (OSError, ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc
    return params, boundary


def _output_path(args, default: str) -> Path:
    path = Path(args.out or default)
    if args.format == "json" and args.out is None:
        path = path.with_suffix(".json")
    return path


class Run:
    """Collects manifest entries while a subcommand executes."""

    def __init__(self, args, argv):
        self.args = args
        self.argv = list(argv)
        self.start = time.perf_counter()
        self.manifest = {
            "subcommand": args.command,
            "argv": self.argv,
            "tool": "topoamp",
            "version": __version__,
            "errors": 0,
        }

    def finish(self, out: Path, rows: int):
        self.manifest["output"] = str(out)
        self.manifest["rows"] = rows
        self.manifest["format"] = self.args.format
        self.manifest["wall_time_s"] = time.perf_counter() - self.start
        manifest_path = Path(self.args.manifest) if self.args.manifest else out.parent / "manifest.json"
        write_json(manifest_path, self.manifest)


def _pmap(fn, items, threads):
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def cmd_phase_diagram(args, run: Run):
    params, _ = _load_params(args)
    try:
        sx, sy = SweepSpec.parse(args.sweep_x), SweepSpec.parse(args.sweep_y)
        if args.nk < 64:
            raise ValueError("--nk must be at least 64")
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    grid = phase_diagram(params, sx, sy, n_k=args.nk, threads=run.threads)
    run.manifest.update(
        params=params.to_dict(), sweep_x=str(sx), sweep_y=str(sy), n_k=args.nk,
        errors=len(grid.errors), sentinel=SENTINEL,
        failed_points=[{"ix": ix, "iy": iy, "message": msg} for ix, iy, msg in grid.errors],
    )
    out = _output_path(args, "phase_diagram.csv")
    return out, write_table(out, PhaseDiagramGrid.COLUMNS, grid.rows(), args.format)


def cmd_spectrum(args, run: Run):
    params, boundary = _load_params(args)
    H = build_dynamical_matrix(params, boundary)
    omegas = parse_grid(args.omega_grid)
    specs = _pmap(lambda w: singular_spectrum(H, float(w)), omegas, run.threads)
    rows, census = [], []
    for w, spec in zip(omegas, specs):
        count, gap = zero_mode_census(spec, args.threshold)
        census.append({"omega": float(w), "zero_modes": count, "gap": gap})
        rows.extend((w, i, v) for i, v in enumerate(spec.values))
    run.manifest.update(
        params=params.to_dict(), boundary=boundary, omega_grid=args.omega_grid,
        zero_mode_threshold=args.threshold, census=census,
    )
    out = _output_path(args, "spectrum.csv")
    return out, write_table(out, SPECTRUM_COLUMNS, rows, args.format)


def cmd_stability(args, run: Run):
    params, boundary = _load_params(args)
    sweeps = [parse_param_sweep(s) for s in (args.sweep_x, args.sweep_y) if s]
    if len({name for name, _ in sweeps}) != len(sweeps):
        raise UsageError("sweep axes must differ")
    points = [{}]
    for name, values in sweeps:
        points = [dict(p, **{name: v}) for p in points for v in values]
    try:
        plist = [params.replace(**{k: (int(v) if k == "n_sites" else float(v)) for k, v in p.items()}) for p in points]
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    reports = _pmap(lambda p: stability_report(build_dynamical_matrix(p, boundary), args.epsilon), plist, run.threads)
    names = [name for name, _ in sweeps]
    rows = [[p[n] for n in names] + [r.max_im_eigenvalue, r.stable] for p, r in zip(points, reports)]
    run.manifest.update(
        params=params.to_dict(), boundary=boundary, sweeps=[args.sweep_x, args.sweep_y],
        stability_epsilon=args.epsilon,
    )
    out = _output_path(args, "stability.csv")
    return out, write_table(out, names + ["max_im_eig", "stable"], rows, args.format)


def _strengths(args) -> list[float]:
    values = parse_list(args.strengths) if args.strengths else [args.strength]
    if any(v < 0 for v in values):
        raise UsageError("disorder strengths must be non-negative")
    return values


def cmd_disorder(args, run: Run):
    params, _ = _load_params(args)
    if args.realizations < 1:
        raise UsageError("--realizations must be positive")
    rows, failed = [], 0
    for w in _strengths(args):
        res = ensemble_spectrum(EnsembleSpec(params, w, args.realizations, args.seed, args.omega), run.threads)
        failed += res.n_failed
        rows.extend((w, r, v[0], v[1]) for r, v in zip(res.realizations, res.values))
    run.manifest.update(
        params=params.to_dict(), seed=args.seed, realizations=args.realizations, omega=args.omega,
        strengths=_strengths(args), rng="numpy Philox keyed by (seed, realization); site = stream position",
        errors=failed,
    )
    out = _output_path(args, "ensemble.csv")
    return out, write_table(out, ENSEMBLE_COLUMNS, rows, args.format)


def cmd_splitting(args, run: Run):
    params, _ = _load_params(args)
    strengths = _strengths(args)
    if strengths != sorted(strengths):
        raise UsageError("--strengths must be ascending")
    if args.realizations < 1:
        raise UsageError("--realizations must be positive")
    curve = splitting_curve(params, args.omega, strengths, args.realizations, args.seed, run.threads)
    rows = zip(
        curve.strengths, curve.lowest_pair_mean, curve.lowest_pair_stderr,
        curve.second_pair_mean, curve.second_pair_stderr, curve.n_ok,
    )
    run.manifest.update(
        params=params.to_dict(), seed=args.seed, realizations=args.realizations, omega=args.omega,
        strengths=strengths, errors=int(sum(args.realizations - n for n in curve.n_ok)),
    )
    out = _output_path(args, "splitting.csv")
    return out, write_table(out, SPLITTING_COLUMNS, rows, args.format)


def _sites(args, n_sites: int) -> list[int]:
    sites = parse_list(args.sites, int) if args.sites else [args.site if args.site is not None else n_sites - 1]
    for j in sites:
        if not 0 <= j < n_sites:
            raise UsageError(f"site {j} outside chain of {n_sites} sites")
    return sites


def _green_at(H, omega, cond_limit):
    try:
        return finite_green(H, float(omega), cond_limit)
    except GreenError as exc:
        raise ComputationError(f"omega={omega}: {exc}") from exc


def cmd_amplifier(args, run: Run):
    params, _ = _load_params(args)
    sites = _sites(args, params.n_sites)
    omegas = parse_grid(args.omega_grid)
    semi = getattr(args, "semi_infinite", False)
    if semi:
        def point(w):
            out = []
            for j in sites:
                g = semi_infinite_gain(params, float(w), j)
                n_amp = semi_infinite_noise(params, j, float(w)) if params.pump == 0 else math.nan
                n_add = n_amp / g if g > 1e-30 else math.inf
                out.append((w, j, g, n_amp, min(n_add, NOISE_CAP), int(not n_add <= NOISE_CAP)))
            return out
    else:
        H = build_dynamical_matrix(params, "open")
        pump = build_pump_matrix(params, "open")

        def point(w):
            G = _green_at(H, w, args.cond_limit)
            pts = [added_noise(G, pump, j) for j in sites]
            return [(w, p.site, p.gain, p.n_amp, p.n_add_reported, int(p.capped)) for p in pts]

    try:
        blocks = _pmap(point, omegas, run.threads)
    except GreenError as exc:
        raise ComputationError(str(exc)) from exc
    rows = [r for block in blocks for r in block]
    run.manifest.update(
        params=params.to_dict(), sites=sites, omega_grid=args.omega_grid,
        mode="semi-infinite" if semi else "finite", cond_limit=args.cond_limit, noise_cap=NOISE_CAP,
    )
    out = _output_path(args, "amplifier.csv")
    return out, write_table(out, AMPLIFIER_COLUMNS, rows, args.format)


def cmd_squeezing(args, run: Run):
    params, _ = _load_params(args)
    sites = _sites(args, params.n_sites)
    omegas = parse_grid(args.omega_grid)
    H = build_dynamical_matrix(params, "open")
    pump = build_pump_matrix(params, "open")

    def point(w):
        G = _green_at(H, w, args.cond_limit)
        rows = []
        for j in sites:
            q = quadrature_state(G, pump, j, args.theta)
            rows.append((
                w, j, q.theta, q.var_x, q.var_p, q.mean_x.real, q.mean_x.imag,
                q.mean_p.real, q.mean_p.imag, q.classify(),
            ))
        return rows

    rows = [r for block in _pmap(point, omegas, run.threads) for r in block]
    run.manifest.update(
        params=params.to_dict(), sites=sites, omega_grid=args.omega_grid, theta=args.theta,
        variance_convention="standard deviation of the output quadrature; vacuum = 1",
    )
    out = _output_path(args, "squeezing.csv")
    return out, write_table(out, SQUEEZING_COLUMNS, rows, args.format)


def cmd_coherence(args, run: Run):
    params, _ = _load_params(args)
    omegas = parse_grid(args.omega_grid)

    def point(w):
        try:
            zp, zm = coherence_lengths(params, float(w))
            return (w, zp.real, zp.imag, zm.real, zm.imag, 1)
        except GreenError:
            return (w, math.nan, math.nan, math.nan, math.nan, 0)

    rows = _pmap(point, omegas, run.threads)
    run.manifest.update(
        params=params.to_dict(), omega_grid=args.omega_grid, errors=sum(1 for r in rows if not r[-1]),
    )
    out = _output_path(args, "coherence.csv")
    return out, write_table(out, COHERENCE_COLUMNS, rows, args.format)


def cmd_floquet_map(args, run: Run):
    try:
        if args.scheme == "local":
            if args.jc is None or args.eta is None or args.dphi is None:
                raise ValueError("local scheme needs --jc, --eta and --dphi")
            spec = LocalDriveSpec(args.jc, args.eta, args.dphi, args.nmax, args.omega_r)
            result = local_drive_map(spec)
        else:
            spec = CouplingDriveSpec(args.a0, args.a1, args.a2, args.a3, args.phi_d, args.delta_omega, args.omega0)
            result = coupling_drive_map(spec)
        fragment = result.fragment()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = Path(args.out or "params.json")
    write_json(out, fragment)
    run.manifest.update(
        scheme=args.scheme, spec=vars(spec),
        raw={"hop": result.hop, "phi": result.phi, "g_s": result.g_s, "g_c": result.g_c},
        note="loss and pump are not changed by the drive; negative hop folded into phi + pi",
    )
    return out, 1


def cmd_verify(args, run: Run):
    from .verify import run_checks

    results = run_checks()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    failed = sum(1 for _, ok, _ in results if not ok)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return None, 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="topoamp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--config", help="JSON model configuration")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one parameter")
        if out:
            p.add_argument("--out", help="output file")
            p.add_argument("--format", choices=("csv", "json"), default="csv")
            p.add_argument("--manifest", help="manifest path (default: manifest.json beside --out)")
        p.add_argument("--threads", type=int, help="worker threads (default: TWPA_THREADS or all cores)")

    p = sub.add_parser("phase-diagram", help="winding numbers and stability over two parameters")
    common(p)
    p.add_argument("--sweep-x", required=True, help="name:start:stop:num")
    p.add_argument("--sweep-y", required=True, help="name:start:stop:num")
    p.add_argument("--nk", type=int, default=1024)
    p.set_defaults(func=cmd_phase_diagram)

    p = sub.add_parser("spectrum", help="singular values of omega - H")
    common(p)
    p.add_argument("--omega-grid", default="0")
    p.add_argument("--threshold", type=float, default=ZERO_MODE_THRESHOLD)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("stability", help="largest imaginary eigenvalue over a parameter sweep")
    common(p)
    p.add_argument("--sweep-x", required=True, help="name:start:stop:num (any model parameter)")
    p.add_argument("--sweep-y")
    p.add_argument("--epsilon", type=float, default=1e-9)
    p.set_defaults(func=cmd_stability)

    for name, func, help_text in (
        ("disorder", cmd_disorder, "per-realization smallest singular values"),
        ("splitting", cmd_splitting, "ensemble means of the two smallest singular values"),
    ):
        p = sub.add_parser(name, help=help_text)
        common(p)
        p.add_argument("--strength", type=float, default=0.2)
        p.add_argument("--strengths", help="comma-separated list, overrides --strength")
        p.add_argument("--realizations", type=int, default=100)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--omega", type=float, default=0.0)
        p.set_defaults(func=func)

    for name, help_text in (("gain", "gain and noise over frequency"), ("noise", "added noise over frequency")):
        p = sub.add_parser(name, help=help_text)
        common(p)
        p.add_argument("--site", type=int)
        p.add_argument("--sites", help="comma-separated site list")
        p.add_argument("--omega-grid", default="-4:4:161")
        p.add_argument("--cond-limit", type=float, default=1e12)
        if name == "gain":
            p.add_argument("--semi-infinite", action="store_true", help="use the semi-infinite chain")
        p.set_defaults(func=cmd_amplifier)

    p = sub.add_parser("squeezing", help="output quadrature statistics")
    common(p)
    p.add_argument("--site", type=int)
    p.add_argument("--sites")
    p.add_argument("--omega-grid", default="-2:2:81")
    p.add_argument("--theta", type=float, default=math.pi / 4)
    p.add_argument("--cond-limit", type=float, default=1e12)
    p.set_defaults(func=cmd_squeezing)

    p = sub.add_parser("coherence", help="inverse coherence lengths of the semi-infinite chain")
    common(p)
    p.add_argument("--omega-grid", default="-4:4:161")
    p.set_defaults(func=cmd_coherence)

    p = sub.add_parser("floquet-map", help="effective parameters of a driving scheme")
    p.add_argument("--scheme", choices=("local", "coupling"), required=True)
    p.add_argument("--jc", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--dphi", type=float)
    p.add_argument("--nmax", type=int, default=40)
    p.add_argument("--omega-r", type=float)
    for amp in ("a0", "a1", "a2", "a3"):
        p.add_argument(f"--{amp}", type=float, default=0.0)
    p.add_argument("--phi-d", type=float, default=0.0)
    p.add_argument("--delta-omega", type=float)
    p.add_argument("--omega0", type=float)
    p.add_argument("--out")
    p.add_argument("--manifest")
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_floquet_map, format="json")

    p = sub.add_parser("verify", help="run the built-in closed-form and oracle checks")
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_verify, format=None, manifest=None)
    return parser


_NEGATIVE_VALUE = re.compile(r"^-[\d.]")


def _join_negative_values(argv: list[str]) -> list[str]:
    """Let option values such as ``-4:4:161`` start with a minus sign."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok.startswith("--") and "=" not in tok and i + 1 < len(argv) and _NEGATIVE_VALUE.match(argv[i + 1]):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def run(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_join_negative_values(argv))
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        session = Run(args, argv)
        session.threads = _resolve_threads(args.threads)
        out, rows = args.func(args, session)
        if out is None:
            return rows
        session.finish(out, rows)
        return 0
    except UsageError as exc:
        print(f"topoamp {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ComputationError, GreenError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"topoamp {args.command}: computation failed: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
