"""Command-line entry point.

Exit codes: 0 success, 2 usage or config error, 3 I/O or format error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import complexity, model
from .config import ModelConfig, load_config
from .container import read_container
from .errors import ConfigError, FormatError, NumericalError, RtfsError
from .metrics import improvements
from .wavio import read_wav, write_wav

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4
VISUAL_KEY = "v0"


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON config file (defaults otherwise)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config field; repeatable (e.g. --set R=12)")


def _resolve_config(args, base: ModelConfig | None = None) -> ModelConfig:
    cfg = load_config(args.config) if args.config else (base or ModelConfig())
    return cfg.with_overrides(args.overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rtfsnet",
                                     description="Audio-visual speech separation inference.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("separate", help="extract the target speaker from a mixture WAV")
    p.add_argument("--mix", type=Path, required=True, help="16 kHz mono mixture WAV")
    p.add_argument("--visual", type=Path, required=True,
                   help=f"tensor container holding '{VISUAL_KEY}' of shape (C_v, T_v)")
    p.add_argument("--weights", type=Path, required=True, help="weight container")
    p.add_argument("--out", type=Path, required=True, help="output WAV path")
    p.add_argument("--pcm16", action="store_true", help="write PCM16 instead of float32")
    _add_config_args(p)

    p = sub.add_parser("analyze", help="parameter and MAC report (no weights needed)")
    _add_config_args(p)
    p.add_argument("--seconds", type=float, default=2.0, help="input duration (default 2)")
    p.add_argument("--format", choices=("text", "json", "csv"), default="text")
    p.add_argument("--out", type=Path, help="write the report here instead of stdout")
    p.add_argument("--plot", type=Path, help="also save a bar chart (PNG) of the report")

    p = sub.add_parser("metrics", help="SI-SNR / SDR and their improvements")
    p.add_argument("--mix", type=Path, required=True)
    p.add_argument("--ref", type=Path, required=True)
    p.add_argument("--est", type=Path, required=True)

    p = sub.add_parser("selftest", help="run the built-in invariant checks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quick", action="store_true", help="skip the smoothness audit")
    _add_config_args(p)

    p = sub.add_parser("init-weights", help="write seeded random weights")
    _add_config_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    return parser


def cmd_separate(args) -> int:
    store = model.load_weights(args.weights)
    cfg = _resolve_config(args, store.config)
    graph = model.build(cfg, store)
    mix = read_wav(args.mix, cfg.sample_rate)
    visual = read_container(args.visual)
    if VISUAL_KEY not in visual:
        raise FormatError("visual container lacks the lip-feature tensor", path=args.visual,
                          tensor=VISUAL_KEY)
    v0 = visual[VISUAL_KEY]
    if v0.dtype != np.float32 or v0.ndim != 2:
        raise FormatError(f"expected a float32 (C_v, T_v) tensor, got {v0.dtype} {v0.shape}",
                          path=args.visual, tensor=VISUAL_KEY)
    est = model.forward(graph, mix, v0)
    write_wav(args.out, est, cfg.sample_rate, "pcm16" if args.pcm16 else "float32")
    print(f"wrote {est.shape[0]} samples to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg = _resolve_config(args)
    if args.seconds <= 0:
        raise ConfigError("--seconds must be positive")
    start = time.perf_counter()
    report = complexity.analyze(cfg, args.seconds)
    text = complexity.report_table(report, args.format)
    if args.out:
        try:
            args.out.write_text(text, encoding="utf-8")
        except OSError as exc:
            raise FormatError(f"cannot write report: {exc}", path=args.out) from exc
    else:
        sys.stdout.write(text)
    if args.plot:
        from .plotting import plot_costs

        plot_costs(report, args.plot)
    print(f"analyzed in {time.perf_counter() - start:.3f} s", file=sys.stderr)
    return EXIT_OK


def cmd_metrics(args) -> int:
    mix, ref, est = read_wav(args.mix), read_wav(args.ref), read_wav(args.est)
    result = improvements(mix, ref, est)
    print(json.dumps(result.to_dict()))
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    cfg = _resolve_config(args)
    results = run_selftest(cfg, args.seed, audit=not args.quick)
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    print("selftest passed" if ok else "selftest FAILED")
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_init_weights(args) -> int:
    cfg = _resolve_config(args)
    store = model.init_random(cfg, args.seed)
    model.save_weights(args.out, store)
    print(f"wrote {len(store)} tensors to {args.out}", file=sys.stderr)
    return EXIT_OK


COMMANDS = {
    "separate": cmd_separate,
    "analyze": cmd_analyze,
    "metrics": cmd_metrics,
    "selftest": cmd_selftest,
    "init-weights": cmd_init_weights,
}


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, RtfsError):
        return exc.exit_code if exc.exit_code in (EXIT_USAGE, EXIT_IO, EXIT_NUMERIC) else EXIT_IO
    if isinstance(exc, FloatingPointError):
        return EXIT_NUMERIC
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_USAGE


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (RtfsError, OSError, ValueError, FloatingPointError) as exc:
        kind = "numerical error" if isinstance(exc, (NumericalError, FloatingPointError)) else "error"
        print(f"rtfsnet {args.command}: {kind}: {exc}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
