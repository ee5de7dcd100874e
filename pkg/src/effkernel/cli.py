"""Command-line interface: reduce, simulate, oracle, detect, presets."""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .detect import detect_kernel
from .eigenflow import WavenumberGrid, fit_lambda_h, sample_eigenvalues
from .errors import (
    AmbiguousAsymptoteError,
    DecayWarning,
    DetectionError,
    EffKernelError,
    InstabilityError,
    NetworkParseError,
    RegularizationError,
    SpecValidationError,
    UnknownPresetError,
    UnsupportedStructureError,
)
from .gridio import (
    load_system,
    read_grid,
    save_system,
    sha256_file,
    write_csv,
    write_grid,
    write_manifest,
    write_pgm,
)
from .lambert import DelayParams
from .netspec import PRESET_NAMES, builtin_presets, parse_network, serialize_network
from .reduction import CutoffSpec, RegularizationMode, build_effective_system, reduce
from .simulate import (
    Ablation,
    Field,
    SimParams,
    dominant_wavenumber,
    noise_field,
    seeded_field,
    simulate_full_network,
    simulate_pair,
    simulate_scalar,
    stability_bound,
    with_cutoff,
)
from .spectral import assemble_symbol

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_UNSUPPORTED = 4
EXIT_DECAY = 5
EXIT_INSTABILITY = 6
EXIT_DETECTION = 7

OUTPUT_ENV = "EFFKERNEL_OUTPUT_DIR"
DEFAULT_GRID = {1: (1024, 0.2), 2: (256, 0.5)}


class _UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# argument parsing


def _network_args(p: argparse.ArgumentParser):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=PRESET_NAMES, help="built-in network")
    src.add_argument("--spec", type=Path, help="network config file")
    p.add_argument("--dim", type=int, choices=(1, 2), help="spatial dimension (default: from the network)")


def _reduce_args(p: argparse.ArgumentParser):
    p.add_argument("--method", choices=("exact", "way1", "way2"), default="way2")
    p.add_argument("--mode", choices=("split", "uniform", "mollifier"), default="uniform",
                   help="regularization of the shifted symbol")
    p.add_argument("--eps", type=float, default=0.05, help="regularization epsilon")
    p.add_argument("--delta", type=float, default=0.1, help="time shift delta of the Lambert map")
    p.add_argument("--s-max", type=float, default=40.0, help="largest wavenumber sampled")
    p.add_argument("--n", type=int, default=4096, help="wavenumber samples")
    p.add_argument("--fit-window", type=float, default=0.25)
    p.add_argument("--threads", type=int, default=1)


def _grid_args(p: argparse.ArgumentParser):
    p.add_argument("--grid-n", type=int, help="nodes per side of the periodic grid (power of two)")
    p.add_argument("--dx", type=float, help="grid spacing")


def _common_args(p: argparse.ArgumentParser):
    p.add_argument("--out", type=Path, help=f"output directory (default ${OUTPUT_ENV} or ./effkernel-out)")
    p.add_argument("--strict", action="store_true", help="treat decay warnings as errors")
    p.add_argument("--dry-run", action="store_true", help="print the plan and exit")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="effkernel",
        description="Reduce linear reaction-diffusion networks to effective kernels and simulate them.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reduce", help="eigenvalue branches, reduced spectrum and kernels")
    _network_args(p)
    _reduce_args(p)
    _grid_args(p)
    _common_args(p)

    p = sub.add_parser("simulate", help="simulate the effective equation")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=PRESET_NAMES)
    src.add_argument("--spec", type=Path)
    src.add_argument("--system", type=Path, help="directory written by 'reduce' (system.json)")
    p.add_argument("--dim", type=int, choices=(1, 2))
    _reduce_args(p)
    _grid_args(p)
    _sim_args(p)
    p.add_argument("--irreversible", action="store_true", help="growth-only reaction max(., 0)")
    p.add_argument("--seed-edge", choices=("left",), help="start from a seeded left edge instead of noise")
    p.add_argument("--seed-width", type=int, default=4, help="seeded columns")
    p.add_argument("--ablate", type=float, metavar="RADIUS", help="zero a central disk of this radius")
    p.add_argument("--ablate-at", type=float, help="time of the ablation (default: halfway)")
    p.add_argument("--u-star", type=float, default=1.0, help="saturation level of the cutoff")
    p.add_argument("--no-cutoff", action="store_true", help="linear run: no cutoff, exact exponential stepping")
    p.add_argument("--conv-floor", type=float, default=1e-12,
                   help="relative level below which convolution values are set to zero")
    p.add_argument("--initial", type=Path, help="initial field as a grid file")
    _common_args(p)

    p = sub.add_parser("oracle", help="simulate the full linear network")
    _network_args(p)
    _grid_args(p)
    _sim_args(p)
    p.add_argument("--mode", dest="init_mode", choices=("single", "noise"), default="single",
                   help="single Fourier mode (leading eigenvector) or white-noise start")
    p.add_argument("--noise", dest="init_mode", action="store_const", const="noise", help="same as --mode noise")
    p.add_argument("--xi", type=float, default=1.0, help="wavenumber of the single-mode start")
    _common_args(p)

    p = sub.add_parser("detect", help="recover a kernel from two snapshots")
    p.add_argument("before", type=Path)
    p.add_argument("after", type=Path)
    p.add_argument("--delta", type=float, required=True, help="time between the snapshots")
    p.add_argument("--floor", type=float, default=1e-6, help="relative mask threshold for |u_hat|")
    _common_args(p)

    p = sub.add_parser("presets", aliases=["preset-list"], help="list built-in networks")
    p.add_argument("--show", choices=PRESET_NAMES, help="print one preset as a config file")
    return parser


def _sim_args(p: argparse.ArgumentParser):
    p.add_argument("--dt", type=float, help="time step (default: 0.9 x stability bound)")
    p.add_argument("--t-end", type=float, default=100.0, help="final time")
    p.add_argument("--snapshots", type=int, default=10, help="number of recorded snapshots after t = 0")
    p.add_argument("--seed", type=int, default=0, help="seed of the initial noise")
    p.add_argument("--noise-amp", type=float, default=0.01, help="noise amplitude in units of u*")


# --------------------------------------------------------------------------
# helpers


def _output_dir(args) -> Path:
    if args.out is not None:
        return args.out
    return Path(os.environ.get(OUTPUT_ENV, "effkernel-out"))


def _load_network(args):
    if getattr(args, "preset", None):
        return builtin_presets(args.preset), args.preset
    text = Path(args.spec).read_text(encoding="utf-8")
    return parse_network(text), str(args.spec)


def _dimension(args, spec) -> int:
    return args.dim if args.dim else spec.dimension_default


def _grid(args, dim) -> tuple[int, float]:
    n, dx = DEFAULT_GRID[dim]
    n = args.grid_n or n
    dx = args.dx or dx
    if n & (n - 1) or n < 8:
        raise _UsageError("--grid-n must be a power of two >= 8")
    return n, dx


def _config_hash(spec) -> str:
    return hashlib.sha256(serialize_network(spec).encode()).hexdigest()


def _manifest(args, argv, outputs, started, extra) -> dict:
    params = {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items())}
    return {
        "tool": "effkernel",
        "tool_version": __version__,
        "command_line": ["effkernel"] + list(argv),
        "command": args.command,
        "parameters": params,
        "outputs": [{"path": p.name if p.parent == outputs[0].parent else str(p), "sha256": sha256_file(p)}
                    for p in outputs],
        "wall_clock_seconds": round(time.time() - started, 3),
        **extra,
    }


def _run_reduction(args, spec, dim):
    symbol = assemble_symbol(spec, dim)
    grid = WavenumberGrid(args.s_max, args.n)
    branches = sample_eigenvalues(symbol, grid, threads=args.threads)
    lam = fit_lambda_h(branches, args.fit_window)
    mode = RegularizationMode(args.mode, args.eps)
    spectrum = reduce(symbol, lam, mode, grid, DelayParams(args.delta, args.eps), args.method, args.threads)
    return branches, spectrum


def _summary(branches, spectrum) -> dict:
    s = spectrum.s
    disp = spectrum.dispersion()
    i = int(np.argmax(disp))
    info = {
        "lambda_h": spectrum.lambda_h.describe(),
        "lambda_h_coefficient": spectrum.lambda_h.coefficient,
        "lambda_max_0": float(branches.lambda_max[0]),
        "reduced_growth_0": float(disp[0] - spectrum.lambda_h(0.0)),
        "kind": spectrum.kind,
        "peak_s": float(s[i]),
        "peak_growth": float(disp[i]),
        "decay_ratio": spectrum.decay_ratio,
    }
    if spectrum.collision is not None:
        info["xi_c"] = spectrum.collision.xi_c
        info["complex_window"] = list(spectrum.collision.window)
    return info


def _print_summary(info: dict):
    print(f"kind               {info['kind']}")
    print(f"lambda_h           {info['lambda_h']}")
    print(f"lambda_max(0)      {info['lambda_max_0']:.10g}")
    label = "mu_max(0)" if info["kind"] == "scalar" else "pair growth(0)"
    print(f"{label:<18} {info['reduced_growth_0']:.10g}")
    print(f"dispersion peak    s = {info['peak_s']:.6g}, growth = {info['peak_growth']:.6g}")
    if "xi_c" in info:
        lo, hi = info["complex_window"]
        print(f"xi_c               {info['xi_c']:.10g} (complex window [{lo:.6g}, {hi:.6g}])")


def _decay_guard(caught, strict: bool):
    decays = [w.message for w in caught if isinstance(w.message, DecayWarning)]
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    if decays and strict:
        raise decays[0]


# --------------------------------------------------------------------------
# commands


def cmd_reduce(args, argv) -> int:
    spec, source = _load_network(args)
    dim = _dimension(args, spec)
    n, dx = _grid(args, dim)
    out = _output_dir(args)
    if args.dry_run:
        print(f"plan: {source}, dim {dim}: eigen branches on [0, {args.s_max}] x {args.n}, "
              f"fit lambda_h, {args.mode} regularization eps={args.eps}, method {args.method}, "
              f"kernels on a {n}^{dim} grid dx={dx}; outputs in {out}")
        return EXIT_OK
    started = time.time()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        branches, spectrum = _run_reduction(args, spec, dim)
        system = build_effective_system(spectrum, n, dx)
    _decay_guard(caught, args.strict)
    outputs = []
    header, cols = spectrum.table()
    outputs.append(write_csv(out / "spectrum.csv", header, cols))
    names = sorted(system.profiles)
    x = system.profiles[names[0]][0]
    outputs.append(write_csv(out / "kernel.csv", ["x" if dim == 1 else "r"] + names,
                             np.column_stack([x] + [system.profiles[k][1] for k in names])))
    header, cols = branches.table()
    outputs.append(write_csv(out / "branches.csv", header, cols))
    outputs += save_system(out / "system", system)
    info = _summary(branches, spectrum)
    _print_summary(info)
    write_manifest(out / "manifest.json", _manifest(args, argv, outputs, started, {
        "config_hash": _config_hash(spec), "source": source, "summary": info}))
    return EXIT_OK


def _snapshot_files(out: Path, idx: int, f: Field) -> list[Path]:
    stem = f"snap_{idx:04d}"
    paths = [write_grid(out / f"{stem}.grid", f)]
    u = f.component(0)
    if f.dimension == 2:
        paths.append(write_pgm(out / f"{stem}.pgm", u))
        line = u[u.shape[0] // 2]
    else:
        line = u
    x = np.arange(line.size) * f.spacing
    cols = [x] + [f.values[c] if f.dimension == 1 else f.values[c][u.shape[0] // 2] for c in range(f.ncomp)]
    paths.append(write_csv(out / f"{stem}.csv", ["x"] + [f"u{c}" for c in range(f.ncomp)], np.column_stack(cols)))
    return paths


def cmd_simulate(args, argv) -> int:
    out = _output_dir(args)
    started = time.time()
    extra = {}
    if args.system:
        system = load_system(args.system)
        spec = None
        extra["source"] = str(args.system)
    else:
        spec, source = _load_network(args)
        dim = _dimension(args, spec)
        n, dx = _grid(args, dim)
        if args.dry_run:
            print(f"plan: reduce {source} (dim {dim}, method {args.method}), then simulate to "
                  f"t = {args.t_end} on a {n}^{dim} grid dx={dx}; outputs in {out}")
            return EXIT_OK
        cut = None if args.no_cutoff else CutoffSpec(args.u_star)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            _, spectrum = _run_reduction(args, spec, dim)
            system = build_effective_system(spectrum, n, dx, cut, profiles=False)
        _decay_guard(caught, args.strict)
        extra.update(source=source, config_hash=_config_hash(spec))
    if args.dry_run:
        print(f"plan: simulate the stored system to t = {args.t_end}; outputs in {out}")
        return EXIT_OK
    if args.no_cutoff:
        system = with_cutoff(system, None)
    shape = system.shape
    linear = system.cutoff is None
    bound = stability_bound(system)
    dt = args.dt if args.dt else (0.1 if linear else 0.9 * bound)
    steps = max(1, int(round(args.t_end / dt)))
    every = max(1, steps // max(1, args.snapshots))
    ablate = None
    if args.ablate:
        at = args.ablate_at if args.ablate_at is not None else args.t_end / 2
        center = (0.5,) * system.dimension
        ablate = Ablation(int(round(at / dt)), args.ablate, center)
    params = SimParams(dt=dt, steps=steps, record_every=every, seed=args.seed, irreversible=args.irreversible,
                       stepper="exponential" if linear else "euler", conv_floor=args.conv_floor, ablate=ablate)
    u_star = system.cutoff.u_star if system.cutoff else 1.0
    if args.initial:
        x0 = read_grid(args.initial)
    elif args.seed_edge:
        x0 = seeded_field(shape, system.spacing, u_star, args.seed_width)
    else:
        x0 = noise_field(shape, system.spacing, args.noise_amp * u_star, args.seed)
    if system.kind == "scalar":
        traj = simulate_scalar(system, Field(x0.values[:1], system.spacing), params)
    else:
        if x0.ncomp >= 2:
            y0 = Field(x0.values[1:2], system.spacing)
        else:
            y0 = noise_field(shape, system.spacing, args.noise_amp * u_star, args.seed + 1)
        traj = simulate_pair(system, Field(x0.values[:1], system.spacing), y0, params)
    outputs = []
    index = []
    for i, f in enumerate(traj.snapshots):
        files = _snapshot_files(out, i, f)
        outputs += files
        index.append({"time": f.time, "files": [p.name for p in files]})
    final = traj.final
    k, conf = dominant_wavenumber(final) if np.ptp(final.component(0)) > 0 else (float("nan"), 0.0)
    print(f"simulated {system.kind} system to t = {final.time:.6g} in {steps} steps of dt = {dt:.6g}")
    print(f"max |u| = {traj.max_abs:.6g}; dominant wavenumber {k:.6g} (confidence {conf:.3g})")
    extra.update(snapshots=index, dt=dt, steps=steps, dominant_wavenumber=k)
    write_manifest(out / "manifest.json", _manifest(args, argv, outputs, started, extra))
    return EXIT_OK


def cmd_oracle(args, argv) -> int:
    spec, source = _load_network(args)
    dim = _dimension(args, spec)
    n, dx = _grid(args, dim)
    out = _output_dir(args)
    dt = args.dt or 0.05
    steps = max(2, int(round(args.t_end / dt)))
    if args.dry_run:
        print(f"plan: exact modal stepping of {source} (dim {dim}) to t = {args.t_end} on a "
              f"{n}^{dim} grid; init {args.init_mode}; outputs in {out}")
        return EXIT_OK
    started = time.time()
    shape = (n,) * dim
    length = n * dx
    symbol = assemble_symbol(spec, dim)
    extra = {"source": source, "config_hash": _config_hash(spec)}
    if args.init_mode == "single":
        m = max(1, int(round(args.xi * length / (2 * np.pi))))
        k = 2 * np.pi * m / length
        x = np.arange(n) * dx
        wave = np.cos(k * x)
        if dim == 2:
            wave = np.broadcast_to(wave[:, None], shape)
        # start on the leading eigenvector so the measured rate is free of transients
        w, v = np.linalg.eig(symbol(k))
        lead = v[:, np.argmax(w.real)]
        lead = (lead / lead[np.argmax(np.abs(lead))]).real
        vals = lead.reshape((-1,) + (1,) * dim) * wave
        every = max(1, steps // 2)
        traj = simulate_full_network(spec, Field(vals, dx), SimParams(dt=dt, steps=steps, record_every=every))
        a, b = traj.snapshots[-2], traj.snapshots[-1]

        def amp(f):
            spec_hat = np.fft.fftn(f.component(0))
            idx = (m,) + (0,) * (dim - 1)
            return abs(spec_hat[idx])

        rate = float(np.log(amp(b) / amp(a)) / (b.time - a.time))
        lam = float(np.max(np.linalg.eigvals(symbol(k)).real))
        rel = abs(rate - lam) / max(abs(lam), 1e-300)
        print(f"mode k = {k:.10g} (index {m}); measured growth {rate:.12g}; lambda_max(k) {lam:.12g}; "
              f"relative error {rel:.3e}")
        extra.update(k=k, measured_growth=rate, lambda_max=lam, relative_error=rel)
    else:
        u0 = noise_field(shape, dx, args.noise_amp, args.seed, spec.size)
        every = max(1, steps // max(1, args.snapshots))
        traj = simulate_full_network(spec, u0, SimParams(dt=dt, steps=steps, record_every=every, seed=args.seed))
        k, conf = dominant_wavenumber(traj.final)
        modes = 2 * np.pi * np.arange(1, n // 2 + 1) / length
        lam = np.max(np.linalg.eigvals(symbol(modes)).real, axis=1)
        k_star = float(modes[np.argmax(lam)])
        print(f"dominant wavenumber {k:.6g} (confidence {conf:.3g}); argmax lambda_max on the grid {k_star:.6g}")
        extra.update(dominant_wavenumber=k, confidence=conf, argmax_lambda_max=k_star)
    outputs = []
    for i, f in enumerate(traj.snapshots):
        outputs += _snapshot_files(out, i, f)
    write_manifest(out / "manifest.json", _manifest(args, argv, outputs, started, extra))
    return EXIT_OK


def cmd_detect(args, argv) -> int:
    out = _output_dir(args)
    if args.dry_run:
        print(f"plan: detect the kernel from {args.before} -> {args.after} with delta {args.delta}; outputs in {out}")
        return EXIT_OK
    started = time.time()
    before, after = read_grid(args.before), read_grid(args.after)
    res = detect_kernel(before, after, args.delta, args.floor)
    k, v = res.radial_profile()
    outputs = [write_csv(out / "spectrum.csv", ["k", "K_hat"], np.column_stack([k, v]))]
    x, kern = res.kernel_profile()
    outputs.append(write_csv(out / "kernel.csv", ["x", "K"], np.column_stack([x, kern])))
    report = {"masked_modes": int(res.mask.sum()), "used_modes": res.n_used, "imag_residue": res.imag_residue,
              "delta": res.delta, "floor": args.floor}
    outputs.append(write_manifest(out / "mask.json", report))
    print(f"used {res.n_used} modes, masked {report['masked_modes']}; imaginary residue {res.imag_residue:.3e}")
    write_manifest(out / "manifest.json", _manifest(args, argv, outputs, started, {"mask": report}))
    return EXIT_OK


def cmd_presets(args, argv) -> int:
    if args.show:
        sys.stdout.write(serialize_network(builtin_presets(args.show)))
        return EXIT_OK
    for name in PRESET_NAMES:
        spec = builtin_presets(name)
        print(f"{name:<24} {','.join(spec.components):<12} {spec.notes}")
    return EXIT_OK


COMMANDS = {
    "reduce": cmd_reduce,
    "simulate": cmd_simulate,
    "oracle": cmd_oracle,
    "detect": cmd_detect,
    "presets": cmd_presets,
    "preset-list": cmd_presets,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args, argv)
    except (NetworkParseError, SpecValidationError, UnknownPresetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (UnsupportedStructureError, AmbiguousAsymptoteError, RegularizationError) as exc:
        print(f"unsupported: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except DecayWarning as exc:
        print(f"error (strict): {exc}", file=sys.stderr)
        return EXIT_DECAY
    except InstabilityError as exc:
        print(f"unstable: {exc}", file=sys.stderr)
        return EXIT_INSTABILITY
    except DetectionError as exc:
        print(f"detection failed: {exc}", file=sys.stderr)
        return EXIT_DETECTION
    except (_UsageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EffKernelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
