"""Command-line entry point: ``esnfilter <subcommand> [options]``.

Every run first prints its fully resolved parameters as a ``key=value``
block. The block is itself a valid ``--config`` file, so saving it and
passing it back reproduces the run.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .distortion import Distortion1DSpec, Distortion2DSpec, distort_1d, distort_2d
from .experiments import (
    HARD_DISTORTION_1D,
    HARD_SYMBOL_HOLD,
    Experiment1DSpec,
    Experiment2DSpec,
    ExperimentResult,
    run_experiment_1d,
    run_experiment_2d,
    score_1d,
    score_2d,
    seed_list,
)
from .formats import (
    atomic_write,
    format_kv,
    load_model,
    parse_frame_shape,
    parse_kv,
    read_signal_csv,
    report_csv_text,
    report_row,
    save_model,
    write_frame_pgm,
    write_report_csv,
    write_signal_csv,
)
from .readout import DEFAULT_LAMBDA, TrainingSet, default_washout, predict, train
from .reservoir import ReservoirConfig
from .signals import SignalSeries, builtin_glyphs, gen_bitstream, gen_glyph_video

PARAMS_BEGIN = "# esnfilter {command}"
PARAMS_END = "# end parameters"


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _frame_shape(text: str) -> tuple[int, int]:
    try:
        return parse_frame_shape(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _rows(text: str) -> slice:
    start, sep, stop = text.partition(":")
    try:
        if not sep:
            raise ValueError
        return slice(int(start) if start else None, int(stop) if stop else None)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a row range like 0:2000, got {text!r}")


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text}")
    return v


def _pos_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _common(p: argparse.ArgumentParser, out_help: str) -> None:
    p.add_argument("--seed", type=_nonneg_int, default=0, help="base random seed")
    p.add_argument("--out", help=out_help)
    p.add_argument("--config", help="key=value file supplying defaults for any option")


def _reservoir_flags(p: argparse.ArgumentParser, n: int, in_scale: Optional[float], lam: float) -> None:
    g = p.add_argument_group("reservoir")
    g.add_argument("--n", type=_pos_int, default=n, help="reservoir size")
    g.add_argument("--rho", type=float, default=0.9, help="spectral radius of W_self")
    g.add_argument("--gamma", type=float, default=0.5, help="leak rate")
    g.add_argument("--kappa", type=float, default=0.5, help="drive gain")
    g.add_argument("--dt", type=float, default=1.0, help="Euler step")
    g.add_argument("--connectivity", type=float, default=0.1)
    g.add_argument(
        "--in-scale", type=float, default=in_scale,
        help="input weight scale" + (" (default 1/sqrt(L*W))" if in_scale is None else ""),
    )
    g.add_argument("--fb-scale", type=float, default=0.0, help="feedback weight scale")
    g.add_argument("--lambda", dest="lam", type=float, default=lam, help="ridge parameter")
    g.add_argument("--washout", type=_nonneg_int, default=None,
                   help="training washout (default 100, or T/4 when T < 400)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="esnfilter",
        description="Echo-state-network inverse filters for distorted signals and video.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="<command>")

    p = sub.add_parser("gen-signal", help="generate a clean +/-1 bitstream")
    _common(p, "output CSV")
    p.add_argument("--length", type=_nonneg_int, default=4000)
    p.add_argument("--hold", type=_pos_int, default=4, help="samples per symbol")

    p = sub.add_parser("gen-video", help="generate a clean glyph video")
    _common(p, "output CSV")
    p.add_argument("--frames", type=_nonneg_int, default=700)
    p.add_argument("--frame-shape", type=_frame_shape, default=(8, 8), metavar="LxW")
    p.add_argument("--hold", type=_pos_int, default=5, help="frames per glyph")

    p = sub.add_parser("distort", help="apply the distortion to a signal CSV")
    _common(p, "output CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--mode", choices=("auto", "1d", "2d"), default="auto",
                   help="auto picks 2d for series with a frame shape")
    p.add_argument("--a", type=_floats, default=Distortion1DSpec().a, help="1-D powers")
    p.add_argument("--b", type=_floats, default=Distortion1DSpec().b, help="1-D delay taps")
    p.add_argument("--c", type=_floats, default=Distortion1DSpec().c, help="1-D noise amplitudes")
    p.add_argument("--gain", type=float, default=Distortion2DSpec().gain, help="2-D gain")
    p.add_argument("--noise-amp", type=float, default=Distortion2DSpec().noise_amp)

    p = sub.add_parser("train", help="fit a readout and save the model")
    _common(p, "output model file")
    p.add_argument("--input", required=True, help="distorted signal CSV")
    p.add_argument("--teacher", required=True, help="clean signal CSV")
    p.add_argument("--rows", type=_rows, default=slice(None), metavar="A:B")
    _reservoir_flags(p, 20, 1.0, DEFAULT_LAMBDA)

    p = sub.add_parser("filter", help="run a saved model over a signal")
    _common(p, "output CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--rows", type=_rows, default=slice(None), metavar="A:B")

    p = sub.add_parser("eval", help="score a filtered signal against the clean one")
    _common(p, "output key=value report")
    p.add_argument("--pred", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--distorted", help="distorted CSV (video: enables PSNR comparison)")
    p.add_argument("--rows", type=_rows, default=slice(None), metavar="A:B",
                   help="rows of target/distorted aligned with pred")
    p.add_argument("--max-lag", type=_nonneg_int, default=5)
    p.add_argument("--eval-washout", type=_nonneg_int, default=None)

    p = sub.add_parser("exp1d", help="bitstream recovery experiment")
    _common(p, "directory for report.csv and aggregate.txt")
    _reservoir_flags(p, 20, 1.0, DEFAULT_LAMBDA)
    p.add_argument("--preset", choices=("default", "hard"), default="default",
                   help="distortion preset; explicit --a/--b/--c/--hold override it")
    p.add_argument("--train-len", type=_pos_int, default=2000)
    p.add_argument("--test-len", type=_pos_int, default=2000)
    p.add_argument("--hold", type=_pos_int, default=None, help="samples per symbol")
    p.add_argument("--a", type=_floats, default=None)
    p.add_argument("--b", type=_floats, default=None)
    p.add_argument("--c", type=_floats, default=None)
    p.add_argument("--max-lag", type=_nonneg_int, default=5)
    p.add_argument("--eval-washout", type=_nonneg_int, default=None)
    p.add_argument("--seeds", type=_pos_int, default=10, help="number of seeds")

    p = sub.add_parser("exp2d", help="glyph-video denoising experiment")
    _common(p, "directory for report.csv, aggregate.txt and sample frames")
    _reservoir_flags(p, 200, None, 1.0)
    p.add_argument("--frame-shape", type=_frame_shape, default=(8, 8), metavar="LxW")
    p.add_argument("--frames", type=_pos_int, default=500, help="training frames")
    p.add_argument("--test-frames", type=_pos_int, default=200)
    p.add_argument("--hold", type=_pos_int, default=5, help="frames per glyph")
    p.add_argument("--gain", type=float, default=Distortion2DSpec().gain)
    p.add_argument("--noise-amp", type=float, default=Distortion2DSpec().noise_amp)
    p.add_argument("--eval-washout", type=_nonneg_int, default=None)
    p.add_argument("--seeds", type=_pos_int, default=5, help="number of seeds")
    p.add_argument("--samples", type=_nonneg_int, default=4,
                   help="PGM triptychs written per seed (needs --out)")

    p = sub.add_parser("dump-glyphs", help="write the built-in glyphs as PGM files")
    _common(p, "output directory")
    p.add_argument("--frame-shape", type=_frame_shape, default=(8, 8), metavar="LxW")

    return parser


def _subparser(parser: argparse.ArgumentParser, command: str) -> argparse.ArgumentParser:
    for action in parser._subparsers._group_actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise KeyError(command)


def _config_argv(sp: argparse.ArgumentParser, path: str) -> list[str]:
    """Turn a key=value file into option tokens placed before the real argv."""
    text = Path(path).read_text()
    entries = parse_kv(text, path)
    flags = {}
    for action in sp._actions:
        for opt in action.option_strings:
            if opt.startswith("--"):
                flags[opt[2:]] = opt
                flags[opt[2:].replace("-", "_")] = opt
        if action.dest not in ("help",) and action.option_strings:
            flags.setdefault(action.dest, action.option_strings[-1])
    tokens = []
    for key, value in entries.items():
        if key == "config":
            continue
        if key not in flags:
            sp.error(f"unknown key {key!r} in config file {path}")
        if value == "":
            continue
        tokens.append(f"{flags[key]}={value}")
    return tokens


def _resolve(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if args.command and getattr(args, "config", None):
        sp = _subparser(parser, args.command)
        try:
            extra = _config_argv(sp, args.config)
        except OSError as exc:
            sp.error(f"cannot read config file: {exc}")
        except ValueError as exc:
            sp.error(str(exc))
        idx = argv.index(args.command)
        args = parser.parse_args(argv[: idx + 1] + extra + argv[idx + 1 :])
    return args


def _fmt_value(v):
    if isinstance(v, slice):
        return f"{'' if v.start is None else v.start}:{'' if v.stop is None else v.stop}"
    if isinstance(v, tuple) and len(v) == 2 and all(isinstance(x, int) for x in v):
        return f"{v[0]}x{v[1]}"
    return v


def _print_params(command: str, params: dict, out) -> None:
    out.write(PARAMS_BEGIN.format(command=command) + "\n")
    out.write(format_kv({k: _fmt_value(v) for k, v in params.items()}))
    out.write(PARAMS_END + "\n")
    out.flush()


def _params(args: argparse.Namespace, **overrides) -> dict:
    params = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    params.update(overrides)
    return params


def _require_out(args) -> Path:
    if not args.out:
        raise RuntimeError(f"{args.command} needs --out")
    return Path(args.out)


def _emit_series(series: SignalSeries, args) -> None:
    write_signal_csv(series, _require_out(args))


def _cmd_gen_signal(args, out) -> None:
    _print_params(args.command, _params(args), out)
    _emit_series(gen_bitstream(args.length, args.hold, args.seed), args)


def _cmd_gen_video(args, out) -> None:
    _print_params(args.command, _params(args), out)
    glyphs = builtin_glyphs(args.frame_shape)
    _emit_series(gen_glyph_video(glyphs, args.frames, args.hold, args.seed), args)


def _cmd_distort(args, out) -> None:
    series = read_signal_csv(args.input)
    mode = args.mode
    if mode == "auto":
        mode = "2d" if series.frame_shape is not None else "1d"
    _print_params(args.command, _params(args, mode=mode), out)
    if mode == "1d":
        spec = Distortion1DSpec(args.a, args.b, args.c, args.seed)
        _emit_series(distort_1d(series, spec), args)
    else:
        spec = Distortion2DSpec(args.gain, args.noise_amp, args.seed)
        _emit_series(distort_2d(series, spec), args)


def _cmd_train(args, out) -> None:
    u = read_signal_csv(args.input)
    d = read_signal_csv(args.teacher)
    u = SignalSeries(u.data[args.rows], u.frame_shape)
    d = SignalSeries(d.data[args.rows], d.frame_shape)
    washout = default_washout(len(u)) if args.washout is None else args.washout
    _print_params(args.command, _params(args, washout=washout), out)
    cfg = ReservoirConfig(
        n=args.n, gamma=args.gamma, kappa=args.kappa, dt=args.dt,
        rho_target=args.rho, connectivity=args.connectivity, in_scale=args.in_scale,
        fb_scale=args.fb_scale, in_dim=u.dim, out_dim=d.dim, seed=args.seed,
    )
    model = train(cfg, TrainingSet(u, d, washout), args.lam)
    save_model(model, _require_out(args))
    out.write(f"training_nrmse={model.training_nrmse!r}\n")


def _cmd_filter(args, out) -> None:
    _print_params(args.command, _params(args), out)
    model = load_model(args.model)
    series = read_signal_csv(args.input)
    series = SignalSeries(series.data[args.rows], series.frame_shape)
    _emit_series(predict(model, series), args)


def _cmd_eval(args, out) -> None:
    pred = read_signal_csv(args.pred)
    target = read_signal_csv(args.target)
    target = SignalSeries(target.data[args.rows], target.frame_shape)
    eval_washout = (
        default_washout(len(target)) if args.eval_washout is None else args.eval_washout
    )
    _print_params(args.command, _params(args, eval_washout=eval_washout), out)
    if len(pred) != len(target):
        raise ValueError(f"pred has {len(pred)} rows, target has {len(target)}")
    if target.frame_shape is not None:
        if not args.distorted:
            raise ValueError("video evaluation needs --distorted for the PSNR comparison")
        dist = read_signal_csv(args.distorted)
        dist = SignalSeries(dist.data[args.rows], dist.frame_shape or target.frame_shape)
        report = score_2d(pred, dist, target, args.seed, eval_washout)
    else:
        report = score_1d(pred, target, args.seed, args.max_lag, eval_washout)
    text = format_kv(report_row(report))
    if args.out:
        atomic_write(args.out, text)
    out.write(text)


def _write_experiment(result: ExperimentResult, args, out) -> None:
    agg = dataclasses.asdict(result.aggregate)
    line = f"aggregate metric={result.metric} " + " ".join(
        f"{k}={v!r}" for k, v in agg.items()
    )
    if args.out:
        out_dir = Path(args.out)
        write_report_csv(result.reports, out_dir / "report.csv")
        atomic_write(out_dir / "aggregate.txt", format_kv({"metric": result.metric, **agg}))
    else:
        out.write(report_csv_text(result.reports))
    out.write(line + "\n")


def _cmd_exp1d(args, out) -> None:
    if args.preset == "hard":
        dist, hold = HARD_DISTORTION_1D, HARD_SYMBOL_HOLD
    else:
        dist, hold = Distortion1DSpec(), 4
    dist = Distortion1DSpec(
        args.a if args.a is not None else dist.a,
        args.b if args.b is not None else dist.b,
        args.c if args.c is not None else dist.c,
    )
    hold = args.hold if args.hold is not None else hold
    spec = Experiment1DSpec(
        rho=args.rho, gamma=args.gamma, kappa=args.kappa, dt=args.dt,
        connectivity=args.connectivity, fb_scale=args.fb_scale, n=args.n,
        train_len=args.train_len, test_len=args.test_len, distortion=dist,
        lam=args.lam, washout=args.washout, eval_washout=args.eval_washout,
        seeds=seed_list(args.seeds, args.seed), symbol_hold=hold,
        max_lag=args.max_lag, in_scale=args.in_scale,
    )
    _print_params(
        args.command,
        _params(
            args, a=dist.a, b=dist.b, c=dist.c, hold=hold,
            washout=spec.resolved_washout, eval_washout=spec.resolved_eval_washout,
        ),
        out,
    )
    _write_experiment(run_experiment_1d(spec), args, out)


def _cmd_exp2d(args, out) -> None:
    spec = Experiment2DSpec(
        rho=args.rho, gamma=args.gamma, kappa=args.kappa, dt=args.dt,
        connectivity=args.connectivity, fb_scale=args.fb_scale, n=args.n,
        frame_shape=args.frame_shape, train_frames=args.frames,
        test_frames=args.test_frames,
        distortion=Distortion2DSpec(args.gain, args.noise_amp),
        lam=args.lam, washout=args.washout, eval_washout=args.eval_washout,
        seeds=seed_list(args.seeds, args.seed), hold=args.hold, in_scale=args.in_scale,
    )
    _print_params(
        args.command,
        _params(
            args, in_scale=spec.resolved_in_scale, washout=spec.resolved_washout,
            eval_washout=spec.resolved_eval_washout,
        ),
        out,
    )
    frames_dir = Path(args.out) / "frames" if args.out and args.samples else None
    _write_experiment(run_experiment_2d(spec, frames_dir, args.samples), args, out)


def _cmd_dump_glyphs(args, out) -> None:
    _print_params(args.command, _params(args), out)
    out_dir = _require_out(args)
    glyphs = builtin_glyphs(args.frame_shape)
    for name, g in zip(glyphs.names, glyphs.glyphs):
        write_frame_pgm(g, out_dir / f"{name}.pgm")
        out.write(f"wrote {out_dir / (name + '.pgm')}\n")


COMMANDS = {
    "gen-signal": _cmd_gen_signal,
    "gen-video": _cmd_gen_video,
    "distort": _cmd_distort,
    "train": _cmd_train,
    "filter": _cmd_filter,
    "eval": _cmd_eval,
    "exp1d": _cmd_exp1d,
    "exp2d": _cmd_exp2d,
    "dump-glyphs": _cmd_dump_glyphs,
}


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    out = sys.stdout if out is None else out
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = _resolve(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        COMMANDS[args.command](args, out)
    except (ValueError, RuntimeError, OSError, np.linalg.LinAlgError) as exc:
        print(f"esnfilter {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
