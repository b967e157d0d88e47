"""Command-line interface.

Every subcommand accepts ``--config file.json`` (see :mod:`.config`).
Failures print one line ``error: <kind>: <message>`` to stderr and exit
with status 1; usage errors exit with status 2.
"""

import argparse
import json
import sys
import warnings

import numpy as np

from .asdm import asdm_upmix
from .config import PipelineConfig, dump_config
from .core import ArirGrid, ListenerPose
from .filterbank import ThirdOctaveBank
from .interpolation import prepare_grid, synthesize_perspective
from .io import GridLoadError, load_grid, read_wav, save_grid, store_arir, write_wav
from .localization import LocalizationError
from .oracle import ShoeboxRoom, lattice_positions, simulate_grid
from .renderer import FineGrid, Trajectory, precompute_fine_grid, stream_convolve


def _floats(n):
    def parse(text):
        vals = [float(v) for v in text.split(",")]
        if len(vals) != n:
            raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers")
        return vals
    return parse


def _ints(n):
    def parse(text):
        vals = [int(v) for v in text.split(",")]
        if len(vals) != n:
            raise argparse.ArgumentTypeError(f"expected {n} comma-separated integers")
        return vals
    return parse


def _pose(text):
    try:
        return ListenerPose.parse(text)
    except ValueError as err:
        raise argparse.ArgumentTypeError(str(err)) from None


def _config(args):
    return PipelineConfig.load(args.config) if args.config else PipelineConfig()


def _prepared(args, cfg):
    grid = load_grid(args.grid)
    if cfg.general.speed_of_sound != grid.speed_of_sound:
        grid.speed_of_sound = cfg.general.speed_of_sound
    return prepare_grid(grid, cfg.interpolation, cfg.peaks, cfg.matching,
                        use_known_source=args.known_source)


def cmd_simulate(args, cfg):
    room = ShoeboxRoom(args.room, args.absorption, args.max_order)
    pos = lattice_positions(args.origin, args.shape, args.spacing, args.height)
    grid = simulate_grid(room, args.source, pos, args.spacing, args.order,
                         cfg.general.sample_rate, args.duration, args.max_order,
                         cfg.general.speed_of_sound, args.system_delay,
                         diffuse=args.diffuse, seed=args.seed)
    grid.system_delay = args.system_delay
    path = save_grid(grid, args.out, args.normalization)
    print(path)


def cmd_enhance(args, cfg):
    grid = load_grid(args.grid)
    asdm_cfg = cfg.asdm
    if args.order is not None:
        asdm_cfg.target_order = args.order
    bank = ThirdOctaveBank(grid.sample_rate)
    arirs = [asdm_upmix(a, asdm_cfg, bank) for a in grid.arirs]
    out = ArirGrid(arirs, grid.spacing, grid.speed_of_sound, grid.source_position,
                   grid.system_delay)
    print(save_grid(out, args.out, args.normalization))


def cmd_localize(args, cfg):
    prep = _prepared(args, cfg)
    result = {"source_position": prep.source.position.tolist(),
              "system_delay": prep.system_delay,
              "angular_cost": prep.source.angular_cost}
    if args.triplet is not None:
        tri = prep.triplet(args.triplet)
        result["matches"] = [{"index": m.index, "position": np.asarray(m.event.position).tolist(),
                              "cost": m.cost, "toas": m.toas.tolist()}
                             for m in tri.matches]
    print(json.dumps(result, indent=1))


def cmd_precompute(args, cfg):
    prep = _prepared(args, cfg)
    r = args.r_fine if args.r_fine is not None else cfg.render.r_fine

    def progress(k, n):
        if args.verbose:
            print(f"node {k}/{n}", file=sys.stderr)

    fine = precompute_fine_grid(prep, r, cfg.render.late_split, progress)
    fine.save(args.out)
    print(args.out)


def cmd_interpolate(args, cfg):
    prep = _prepared(args, cfg)
    args.pose.check_inside(prep.grid.lattice)
    arir = synthesize_perspective(prep, args.pose)
    store_arir(arir, args.out, args.normalization)
    print(args.out)


def cmd_render(args, cfg):
    fine = FineGrid.load(args.fine)
    traj = Trajectory.load(args.trajectory)
    sig, rate = read_wav(args.input)
    if rate != fine.sample_rate:
        raise ValueError(f"input sample rate {rate:g} differs from the grid "
                         f"({fine.sample_rate:g})")
    frame = args.frame_size or cfg.render.frame_size
    out = stream_convolve(sig[0], traj, fine, frame, cfg.render.fractional,
                          cfg.render.spectral_correction)
    write_wav(args.out, out, rate)
    print(args.out)


def build_parser():
    p = argparse.ArgumentParser(prog="aririnterp",
                                description="Variable-perspective interpolation of "
                                            "Ambisonic room impulse response grids.")
    p.add_argument("--dump-config", action="store_true",
                   help="print the default configuration with descriptions and exit")
    sub = p.add_subparsers(dest="command")

    def add(name, func, help_text):
        s = sub.add_parser(name, help=help_text, description=help_text)
        s.add_argument("--config", help="JSON configuration file")
        s.set_defaults(func=func)
        return s

    def grid_args(s):
        s.add_argument("--grid", required=True, help="grid manifest (JSON)")
        s.add_argument("--known-source", action="store_true",
                       help="use the manifest's source position instead of localizing")

    s = add("simulate", cmd_simulate, "simulate a shoebox-room ARIR grid")
    s.add_argument("--room", type=_floats(3), default=[14.0, 10.0, 4.1], help="Lx,Ly,Lz (m)")
    s.add_argument("--absorption", type=float, default=0.3, help="wall energy absorption")
    s.add_argument("--source", type=_floats(3), required=True, help="x,y,z (m)")
    s.add_argument("--origin", type=_floats(2), default=[5.0, 3.0], help="grid corner x,y")
    s.add_argument("--shape", type=_ints(2), default=[3, 3], help="nodes along x,y")
    s.add_argument("--spacing", type=float, default=2.0, help="grid spacing (m)")
    s.add_argument("--height", type=float, default=1.2, help="grid height (m)")
    s.add_argument("--order", type=int, default=1, help="SH order")
    s.add_argument("--duration", type=float, default=0.3, help="ARIR length (s)")
    s.add_argument("--max-order", type=int, default=10, help="image-source order")
    s.add_argument("--system-delay", type=float, default=0.0, help="uniform delay (s)")
    s.add_argument("--diffuse", action=argparse.BooleanOptionalAction, default=None,
                   help="append a diffuse noise tail")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--normalization", choices=["N3D", "SN3D"], default="N3D")
    s.add_argument("--out", required=True, help="output directory")

    s = add("enhance", cmd_enhance, "ASDM upmix of a first-order grid")
    s.add_argument("--grid", required=True, help="grid manifest (JSON)")
    s.add_argument("--order", type=int, help="target order (overrides the config)")
    s.add_argument("--normalization", choices=["N3D", "SN3D"], default="N3D")
    s.add_argument("--out", required=True, help="output directory")

    s = add("localize", cmd_localize, "localize the direct source (and triplet matches)")
    grid_args(s)
    s.add_argument("--triplet", type=_ints(3), help="also match peaks of this triplet i,j,k")

    s = add("precompute", cmd_precompute, "synthesize a fine grid for rendering")
    grid_args(s)
    s.add_argument("--r-fine", type=float, help="fine spacing (m)")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--verbose", action="store_true")

    s = add("interpolate", cmd_interpolate, "synthesize the ARIR at one listener pose")
    grid_args(s)
    s.add_argument("--pose", type=_pose, required=True,
                   help="x,y,z[,yaw,pitch,roll] in m and degrees")
    s.add_argument("--normalization", choices=["N3D", "SN3D"], default="N3D")
    s.add_argument("--out", required=True, help="output WAV")

    s = add("render", cmd_render, "convolve a signal along a listener trajectory")
    s.add_argument("--fine", required=True, help="fine-grid directory")
    s.add_argument("--trajectory", required=True,
                   help="JSON list of {t_seconds, x, y, z, yaw, pitch, roll}")
    s.add_argument("--input", required=True, help="input WAV (first channel used)")
    s.add_argument("--frame-size", type=int, help="frame size (overrides the config)")
    s.add_argument("--out", required=True, help="output WAV")
    return p


def _kind(err):
    if isinstance(err, LocalizationError):
        return err.kind
    if isinstance(err, GridLoadError):
        return err.kind
    if isinstance(err, (FileNotFoundError, PermissionError, OSError)):
        return "io-error"
    if isinstance(err, json.JSONDecodeError):
        return "config-error"
    return "invalid-input"


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.dump_config:
        print(dump_config())
        return 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    warnings.simplefilter("once")
    # segment truncation is routine in dense early responses
    warnings.filterwarnings("ignore", message="matched peaks closer")
    try:
        cfg = _config(args)
        args.func(args, cfg)
    except (LocalizationError, GridLoadError, OSError, ValueError) as err:
        msg = " ".join(str(err).split())
        print(f"error: {_kind(err)}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
