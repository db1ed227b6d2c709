"""Command-line front end.

Subcommands: assemble, modes, simulate, fd, signature, bench. Every
output file starts with header comments echoing the tool version, the
seed, and the parameters that produced it. Exit codes: 0 success,
1 numerical failure, 2 I/O or argument error.

The environment variable EDDYMODES_THREADS, when set, caps the thread
count of the underlying numerics libraries (exported before they load).
"""
from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path

THREAD_ENV = "EDDYMODES_THREADS"


def _apply_thread_override():
    threads = os.environ.get(THREAD_ENV)
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS", "NUMBA_NUM_THREADS"):
            os.environ.setdefault(var, threads)


@dataclass
class RunManifest:
    """What produced a batch of outputs; echoed into every file header."""

    command: str
    inputs: tuple[str, ...]
    outdir: Path
    seed: int
    params: dict = dc_field(default_factory=dict)

    def header_lines(self) -> tuple[str, ...]:
        from . import __version__

        parts = [f"eddymodes {__version__}", f"command: {self.command}",
                 f"seed: {self.seed}"]
        if self.inputs:
            parts.append("inputs: " + ", ".join(self.inputs))
        for k in sorted(self.params):
            parts.append(f"{k}: {self.params[k]}")
        return tuple(parts)

    def prepare(self):
        self.outdir.mkdir(parents=True, exist_ok=True)
        probe = self.outdir / ".writable"
        try:
            probe.touch()
            probe.unlink()
        except OSError as exc:
            raise SystemExit(f"output directory not writable: {exc}")


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(2)


def _parse_drive_file(text: str):
    """Drive format: '[drive]' sections with 'ports = a,b', 'sources = x'
    and 'tone I_A f_Hz phi_rad' lines."""
    from .errors import ParseError
    from .network import DriveSignal, Tone

    signals = []
    ports: list[str] = []
    sources: list[str] = []
    tones: list[Tone] = []
    started = False

    def flush(lineno):
        nonlocal ports, sources, tones
        if started:
            if not tones:
                raise ParseError("drive section has no tones", lineno)
            signals.append(DriveSignal(tones=tuple(tones), ports=tuple(ports),
                                       sources=tuple(sources)))
        ports, sources, tones = [], [], []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line == "[drive]":
            flush(lineno)
            started = True
        elif line.startswith("ports"):
            _, _, rhs = line.partition("=")
            ports = [p.strip() for p in rhs.split(",") if p.strip()]
        elif line.startswith("sources"):
            _, _, rhs = line.partition("=")
            sources = [s.strip() for s in rhs.split(",") if s.strip()]
        elif line.startswith("tone"):
            toks = line.split()
            if len(toks) != 4:
                raise ParseError("expected: tone I_A f_Hz phi_rad", lineno)
            tones.append(Tone(float(toks[1]), float(toks[2]), float(toks[3])))
        else:
            raise ParseError(f"unrecognized drive line: {line!r}", lineno)
    flush(None)
    if not signals:
        raise ParseError("drive file defines no [drive] section", None)
    return tuple(signals)


# --- subcommands ------------------------------------------------------------------


def cmd_assemble(args) -> int:
    from .assembly import assemble_branch_matrices, assemble_source_mutuals, \
        build_current_basis, electrode_incidence
    from .matrixio import write_cache
    from .network import parse_model
    from .reduction import project_model

    manifest = RunManifest("assemble", (args.model,), Path(args.out), args.seed,
                           {"quad_order": args.quad_order})
    manifest.prepare()
    net = parse_model(_read_text(args.model))
    bm = assemble_branch_matrices(net, quad_order=args.quad_order)
    basis = build_current_basis(net)
    e = electrode_incidence(net, basis)
    m0, md, free_names = assemble_source_mutuals(net, basis)
    rm = project_model(bm, basis, e, m0=m0, md=md, source_names=free_names,
                       port_names=tuple(el.name for el in net.electrodes[:-1]))
    cache = manifest.outdir / "cache.txt"
    write_cache(cache, rm, net=net, e=e.e, header_lines=manifest.header_lines())
    print(f"N_X = {basis.n_columns}")
    print(f"N_0 = {rm.n_internal}")
    print(f"N_e = {net.n_electrodes}")
    print(f"cache: {cache}")
    return 0


def cmd_modes(args) -> int:
    import numpy as np

    from .matrixio import read_cache
    from .modal import generalized_eig, write_modal_csv

    manifest = RunManifest("modes", (args.cache,), Path(args.out), args.seed)
    manifest.prepare()
    rm, _net = read_cache(args.cache)
    basis = generalized_eig(rm.l_i, rm.r_i)
    out = manifest.outdir / "modes.csv"
    write_modal_csv(out, basis, header_lines=manifest.header_lines())
    if basis.n_modes:
        def offratio(m):
            d = np.abs(np.diag(m)).min()
            off = np.abs(m - np.diag(np.diag(m))).max()
            return off / d if d > 0 else float("inf")

        lv = basis.v.T @ (rm.l_i.full @ basis.v)
        rv = basis.v.T @ (rm.r_i.full @ basis.v)
        print(f"tau_1 = {basis.tau[0]!r} s")
        print(f"tau_N = {basis.tau[-1]!r} s")
        print(f"orthogonality: off/diag L = {offratio(lv):.3e}, "
              f"R = {offratio(rv):.3e}")
    if not args.no_plots:
        from . import plots
        plots.save_mode_spectrum(manifest.outdir / "modes.png", basis)
    print(f"modes: {out}")
    return 0


def cmd_simulate(args) -> int:
    import numpy as np

    from .matrixio import read_cache
    from .modal import generalized_eig
    from .transient import (
        TransientConfig,
        run_transient,
        write_states_csv,
        write_timeseries_csv,
        write_timing_csv,
    )

    manifest = RunManifest(
        "simulate", (args.cache, args.drive), Path(args.out), args.seed,
        {"method": args.method, "theta": args.theta, "dt": args.dt,
         "t_end": args.t_end, "capture_stride": args.capture_stride})
    manifest.prepare()
    rm, net = read_cache(args.cache)
    drives = _parse_drive_file(_read_text(args.drive))

    probes = None
    if args.probes and net is not None:
        from .ndt import ProbeRing
        ring = ProbeRing(count=args.probes)
        radius = float(np.hypot(net.nodes[:, 0], net.nodes[:, 1]).max())
        probes = ring.positions(radius)

    cfg = TransientConfig(theta=args.theta, dt=args.dt, t_end=args.t_end,
                          method=args.method, probes=probes,
                          capture_stride=args.capture_stride)
    modal = None
    eig_time = 0.0
    if args.method == "td2":
        t0 = time.perf_counter()
        modal = generalized_eig(rm.l_i, rm.r_i)
        eig_time = time.perf_counter() - t0
    result = run_transient(rm, net, drives, cfg, modal=modal)
    result.wall_time_setup += eig_time
    hdr = manifest.header_lines()
    write_states_csv(manifest.outdir / "states.csv", result, hdr)
    if result.probe_fields is not None:
        write_timeseries_csv(manifest.outdir / "fields.csv", result, hdr)
        if not args.no_plots:
            from . import plots
            plots.save_probe_trace(manifest.outdir / "trace.png", result)
    write_timing_csv(manifest.outdir / "timing.csv", [result], hdr)
    print(f"steps = {result.n_steps}")
    print(f"setup_s = {result.wall_time_setup:.6f}")
    print(f"stepping_s = {result.wall_time_stepping:.6f}")
    return 0


def cmd_fd(args) -> int:
    import math

    import numpy as np

    from .frequency import PhasorSet, azimuthal_component, fd_solve, write_phasor_csv
    from .matrixio import read_cache

    manifest = RunManifest("fd", (args.cache, args.drive), Path(args.out),
                           args.seed, {"probes": args.probes})
    manifest.prepare()
    rm, net = read_cache(args.cache)
    drives = _parse_drive_file(_read_text(args.drive))

    port_names = list(rm.port_names) or [str(i) for i in range(rm.n_ports)]
    freq_set: dict[float, np.ndarray] = {}
    for d in drives:
        for tone in d.tones:
            ph = freq_set.setdefault(tone.frequency, np.zeros(rm.n_ports, complex))
            amp = tone.amplitude * np.exp(1j * tone.phase)
            for p in d.ports:
                ph[port_names.index(p)] += amp

    probes = angles = None
    if args.probes and net is not None and rm.basis is not None:
        from .ndt import ProbeRing
        ring = ProbeRing(count=args.probes)
        radius = float(np.hypot(net.nodes[:, 0], net.nodes[:, 1]).max())
        probes = ring.positions(radius)
        angles = ring.angles()

    field_ps = PhasorSet(probe_angles=tuple(map(float, angles)) if angles is not None else ())
    current_ps = PhasorSet()
    for f in sorted(freq_set):
        omega = 2 * math.pi * f
        currents, fields = fd_solve(rm, net, omega, freq_set[f], probes=probes)
        for j, z in enumerate(currents):
            current_ps[(j, float(f))] = z
        if fields is not None:
            phi = azimuthal_component(fields[None, :, :].real, angles)[0] \
                + 1j * azimuthal_component(fields[None, :, :].imag, angles)[0]
            for p in range(len(angles)):
                field_ps[(p, float(f))] = phi[p]
    hdr = manifest.header_lines()
    if field_ps.entries:
        write_phasor_csv(manifest.outdir / "field_phasors.csv", field_ps, hdr)
        print(f"field phasors: {manifest.outdir / 'field_phasors.csv'}")
    if args.currents or not field_ps.entries:
        write_phasor_csv(manifest.outdir / "current_phasors.csv", current_ps, hdr)
        print(f"current phasors: {manifest.outdir / 'current_phasors.csv'}")
    return 0


def cmd_signature(args) -> int:
    from .modal import generalized_eig
    from .ndt import (
        build_reduced,
        crack_signature,
        default_experiment,
        run_configuration,
        spec_from_json,
        spec_to_json,
        write_locus_csv,
        write_signature_csv,
    )

    if args.write_default:
        Path(args.write_default).write_text(spec_to_json(default_experiment()))
        print(f"default experiment spec: {args.write_default}")
        return 0

    manifest = RunManifest("signature", (args.spec,), Path(args.out), args.seed)
    manifest.prepare()
    spec = spec_from_json(_read_text(args.spec))
    hdr = manifest.header_lines()

    net, rm = build_reduced(spec, None)
    basis = generalized_eig(rm.l_i, rm.r_i) if spec.method != "fd" else None
    background = run_configuration(spec, None, reuse=(net, rm, basis))
    for idx, defect in enumerate(spec.defects):
        ps = run_configuration(spec, defect)
        sig = crack_signature(ps, background)
        write_signature_csv(manifest.outdir / f"signature_{idx}.csv", sig, hdr)
        write_locus_csv(manifest.outdir / f"locus_{idx}.csv", sig, hdr)
        if not args.no_plots:
            from . import plots
            plots.save_signature_loci(manifest.outdir / f"loci_{idx}.png", sig)
            plots.save_signature_magnitude(manifest.outdir / f"magnitude_{idx}.png", sig)
        peak = max(abs(z) for z in sig.entries.values())
        print(f"defect {idx}: max |dB| = {peak:.3e} T")
    if not args.no_plots:
        from . import plots
        plots.save_drive_waveform(manifest.outdir / "drive.png", spec.drive())
    print(f"outputs in {manifest.outdir}")
    return 0


def run_bench(sizes, steps: int, theta: float = 1.0, dt: float = 1.0 / 30000.0,
              n_circ: int = 25):
    """Tube grids of increasing size, times the two transient paths.

    Returns (rows, fits): rows of (n0, method, setup_s, stepping_s, steps,
    per_step_s) and per-method log-log slope fits of per-step cost.
    """
    import numpy as np

    from .modal import generalized_eig
    from .ndt import build_reduced, ExperimentSpec
    from .network import Tone
    from .transient import TransientConfig, run_transient

    rows = []
    for target in sizes:
        n_axial = max(int(round((target - 1) / n_circ)) + 1, 2)
        spec = ExperimentSpec(
            n_axial=n_axial, n_circ=n_circ, length=0.025 * (n_axial - 1),
            tones=(Tone(4.0, 50.0, 0.0),))
        net, rm = build_reduced(spec, None)
        drive = spec.drive()
        t_end = steps * dt
        cfg1 = TransientConfig(theta=theta, dt=dt, t_end=t_end, method="td1",
                               capture_state=False)
        res1 = run_transient(rm, net, drive, cfg1)
        rows.append((rm.n_internal, "td1", res1.wall_time_setup,
                     res1.wall_time_stepping, res1.n_steps, res1.per_step_cost))
        t0 = time.perf_counter()
        basis = generalized_eig(rm.l_i, rm.r_i)
        eig_time = time.perf_counter() - t0
        cfg2 = TransientConfig(theta=theta, dt=dt, t_end=t_end, method="td2",
                               capture_state=False)
        res2 = run_transient(rm, net, drive, cfg2, modal=basis)
        rows.append((rm.n_internal, "td2", res2.wall_time_setup + eig_time,
                     res2.wall_time_stepping, res2.n_steps, res2.per_step_cost))

    fits = {}
    for method in ("td1", "td2"):
        pts = [(r[0], r[5]) for r in rows if r[1] == method]
        x = np.log([p[0] for p in pts])
        y = np.log([p[1] for p in pts])
        slope, intercept = np.polyfit(x, y, 1)
        fits[method] = (float(slope), float(intercept))
    return rows, fits


def cmd_bench(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",")]
    manifest = RunManifest("bench", (), Path(args.out), args.seed,
                           {"sizes": args.sizes, "steps": args.steps})
    manifest.prepare()
    rows, fits = run_bench(sizes, args.steps)
    out = manifest.outdir / "bench.csv"
    with open(out, "w") as fh:
        for line in manifest.header_lines():
            fh.write(f"# {line}\n")
        for method, (slope, _) in sorted(fits.items()):
            fh.write(f"# per-step scaling exponent {method}: {slope!r}\n")
        fh.write("n0,method,setup_s,stepping_s,steps,per_step_s\n")
        for r in rows:
            fh.write(f"{r[0]},{r[1]},{r[2]!r},{r[3]!r},{r[4]},{r[5]!r}\n")
    if not args.no_plots:
        from . import plots
        plots.save_bench_scaling(manifest.outdir / "bench.png", rows, fits)
    for method, (slope, _) in sorted(fits.items()):
        print(f"{method} per-step exponent: {slope:.3f}")
    print(f"bench table: {out}")
    return 0


# --- entry point ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="eddymodes",
        description="Transient eddy-current solver on filament networks: "
                    "coupled theta stepping, decoupled modal stepping, and "
                    "per-tone frequency-domain solution.")
    p.add_argument("--seed", type=int, default=0,
                   help="recorded in output headers (outputs are deterministic)")
    sub = p.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("assemble", help="build and cache the reduced model")
    pa.add_argument("model", help="model file")
    pa.add_argument("--out", default="out", help="output directory")
    pa.add_argument("--quad-order", type=int, default=8, dest="quad_order")
    pa.set_defaults(func=cmd_assemble)

    pm = sub.add_parser("modes", help="time constants and mode table")
    pm.add_argument("cache", help="cache file from 'assemble'")
    pm.add_argument("--out", default="out")
    pm.add_argument("--no-plots", action="store_true")
    pm.set_defaults(func=cmd_modes)

    ps = sub.add_parser("simulate", help="transient run")
    ps.add_argument("cache")
    ps.add_argument("drive", help="drive file")
    ps.add_argument("--method", choices=("td1", "td2"), default="td1")
    ps.add_argument("--theta", type=float, default=1.0)
    ps.add_argument("--dt", type=float, required=True)
    ps.add_argument("--t-end", type=float, required=True, dest="t_end")
    ps.add_argument("--capture-stride", type=int, default=1, dest="capture_stride")
    ps.add_argument("--probes", type=int, default=0,
                    help="probe-ring point count (0: no field observers)")
    ps.add_argument("--out", default="out")
    ps.add_argument("--no-plots", action="store_true")
    ps.set_defaults(func=cmd_simulate)

    pf = sub.add_parser("fd", help="per-tone frequency-domain solve")
    pf.add_argument("cache")
    pf.add_argument("drive")
    pf.add_argument("--probes", type=int, default=25)
    pf.add_argument("--currents", action="store_true",
                    help="also export internal current phasors")
    pf.add_argument("--out", default="out")
    pf.set_defaults(func=cmd_fd)

    pg = sub.add_parser("signature", help="background vs defect signatures")
    pg.add_argument("spec", nargs="?", default=None, help="experiment JSON")
    pg.add_argument("--write-default", metavar="PATH",
                    help="write the default experiment spec and exit")
    pg.add_argument("--out", default="out")
    pg.add_argument("--no-plots", action="store_true")
    pg.set_defaults(func=cmd_signature)

    pb = sub.add_parser("bench", help="cost-scaling comparison of td1 vs td2")
    pb.add_argument("--sizes", default="125,250,500,1000")
    pb.add_argument("--steps", type=int, default=200)
    pb.add_argument("--out", default="out")
    pb.add_argument("--no-plots", action="store_true")
    pb.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    _apply_thread_override()
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "signature" and not args.write_default and not args.spec:
        parser.error("signature needs a spec file or --write-default")

    from .errors import InputError, NumericalError

    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
