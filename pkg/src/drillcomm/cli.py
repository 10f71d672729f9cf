"""Command line interface.

Subcommands: channel, train, eval-ber, eval-papr, eval-psd.  All take
``--config`` (a JSON file path or the preset names ``paper``/``desk``) and
``--out`` for the output directory.  Errors are reported as a JSON object on
stderr with a nonzero exit code.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import evalrun
from .config import ConfigError, SimConfig, load_config


def _parse_sweep(text: str):
    try:
        start, step, stop = (float(x) for x in text.split(":"))
    except ValueError:
        raise ConfigError(
            f"ebno: expected start:step:stop, got {text!r}") from None
    if step <= 0 or stop < start:
        raise ConfigError(f"ebno: bad range {text!r}")
    values = []
    x = start
    while x <= stop + 1e-9:
        values.append(round(x, 10))
        x += step
    return tuple(values)


def _load(args) -> SimConfig:
    sim = load_config(args.config)
    if args.seed is not None:
        sim = dataclasses.replace(sim, seed=args.seed).validate()
    return sim


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drillcomm",
        description="Acoustic drill-string telemetry simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, model=False, system=False, ebno=False):
        p.add_argument("--config", required=True,
                       help="config JSON path, or preset name 'paper'/'desk'")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        if system:
            p.add_argument("--system", required=True, choices=["ae", "ofdm"])
        if model:
            p.add_argument("--model", default=None,
                           help="trained model JSON (required for --system ae)")
        if ebno:
            p.add_argument("--ebno", default=None, metavar="START:STEP:STOP",
                           help="override the Eb/N0 sweep from the config")

    common(sub.add_parser("channel", help="export frequency/impulse response"))
    common(sub.add_parser("train", help="train the autoencoder modem"))
    common(sub.add_parser("eval-ber", help="Monte Carlo BER sweep"),
           model=True, system=True, ebno=True)
    common(sub.add_parser("eval-papr", help="PAPR CCDF"),
           model=True, system=True)
    common(sub.add_parser("eval-psd", help="Welch PSD of the packet stream"),
           model=True, system=True)
    return parser


def _run(args) -> None:
    sim = _load(args)
    model = None
    if getattr(args, "model", None):
        model = evalrun.load_model(args.model)
    if args.command == "channel":
        evalrun.run_channel_export(sim, args.out)
    elif args.command == "train":
        evalrun.run_train(sim, args.out)
    elif args.command == "eval-ber":
        sweep = _parse_sweep(args.ebno) if args.ebno else None
        evalrun.run_eval_ber(sim, args.system, args.out, model=model, sweep=sweep)
    elif args.command == "eval-papr":
        evalrun.run_eval_papr(sim, args.system, args.out, model=model)
    elif args.command == "eval-psd":
        evalrun.run_eval_psd(sim, args.system, args.out, model=model)
    else:  # pragma: no cover - argparse enforces the choices
        raise ConfigError(f"unknown command {args.command!r}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _run(args)
    except ConfigError as exc:
        json.dump({"error": "config", "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
