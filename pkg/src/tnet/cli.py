"""Command line entry point: ``tnet {train,eval,predict,synth}``.

Exit codes: 0 success, 2 config error, 3 data error, 4 checkpoint error.
Failures print one line to stderr: ``error: <reason_code>: <message>``.
"""
import argparse
import logging
import os
import sys
from dataclasses import fields

import numpy as np
from PIL import Image

from .config import TOGGLE_FIELDS, RunConfig, parse_kv
from .data import RgbtSample, load_dataset, read_image, read_thermal, synthetic_dataset, to_uint8, write_dataset
from .decoder import ABLATIONS, AblationToggles
from .errors import ConfigError, DataError, TNetError
from .train import evaluate_model, load_checkpoint, predict_sample, resolve_out_dir, train

def _flag(name):
    return "--" + name.replace("_", "-")


def _add_config_flags(parser):
    for f in fields(RunConfig):
        kind = f.type if isinstance(f.type, type) else {"bool": bool, "int": int, "float": float, "str": str}[f.type]
        if kind is bool:
            parser.add_argument(_flag(f.name), dest=f.name, action=argparse.BooleanOptionalAction, default=None)
        else:
            parser.add_argument(_flag(f.name), dest=f.name, type=kind, default=None, metavar=f.name.upper())


def _config_from_args(args):
    values = parse_kv(args.config) if args.config else {}
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    return RunConfig.from_dict(values)


def cmd_train(args):
    config = _config_from_args(args)
    model, history = train(config, log=print)
    ck = history["checkpoint"]
    print(f"checkpoint: {ck}")
    if history["metrics"]:
        last = history["metrics"][-1]
        print(f"val max_f={last['max_f']:.4f} mae={last['mae']:.4f}")
    return 0


def _toggle_overrides(args, base):
    if args.ablation:
        return ABLATIONS[args.ablation]
    changes = {k: getattr(args, k) for k in TOGGLE_FIELDS if getattr(args, k, None) is not None}
    if not changes:
        return base
    return AblationToggles(**{**base.as_dict(), **changes})


def cmd_eval(args):
    model, config, blob = load_checkpoint(args.checkpoint)
    samples = load_dataset(args.data, args.split)  # fails before any output is written
    trained = model.toggles
    toggles = _toggle_overrides(args, trained)
    input_size = args.input_size or config.input_size
    report, preds = evaluate_model(model, samples, input_size, toggles)

    out_dir = resolve_out_dir(args.out)
    pred_dir = os.path.join(out_dir, "predictions")
    os.makedirs(pred_dir, exist_ok=True)
    for s, p in zip(samples, preds):
        Image.fromarray(to_uint8(p)).save(os.path.join(pred_dir, f"{s.id}.png"))

    mismatch = sorted(k for k in TOGGLE_FIELDS if getattr(toggles, k) != getattr(trained, k))
    report.header.update({
        "checkpoint": os.path.abspath(args.checkpoint),
        "checkpoint_epoch": blob.get("epoch"),
        "dataset": os.path.abspath(args.data),
        "input_size": input_size,
        "toggles": ",".join(f"{k}={getattr(toggles, k)}" for k in TOGGLE_FIELDS),
        "toggle_mismatch": ",".join(mismatch) if mismatch else "none",
    })
    report.write(out_dir)
    if mismatch:
        print(f"warning: toggles differ from training: {', '.join(mismatch)}", file=sys.stderr)
    for k, v in report.as_dict().items():
        print(f"{k} = {v}")
    return 0


def cmd_predict(args):
    model, config, _ = load_checkpoint(args.checkpoint)
    rgb = read_image(args.rgb)
    thermal = read_thermal(args.thermal)
    if rgb.shape[:2] != thermal.shape[:2]:
        raise DataError(f"rgb {rgb.shape[:2]} and thermal {thermal.shape[:2]} sizes differ")
    sample = RgbtSample(rgb, thermal, np.zeros(rgb.shape[:2]), os.path.basename(args.rgb))
    toggles = _toggle_overrides(args, model.toggles)
    pred, alpha = predict_sample(model, sample, args.input_size or config.input_size, toggles)
    out = resolve_out_dir(args.out)
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    Image.fromarray(to_uint8(pred)).save(out)
    print(f"alpha = {alpha:.8f}")
    print(f"saliency: {out}")
    return 0


def cmd_synth(args):
    if args.n <= 0:
        raise ConfigError(f"--n must be positive, got {args.n}")
    lo, hi = args.brightness
    samples = synthetic_dataset(
        args.n, canvas_size=args.size, seed=args.seed, brightness_range=(lo, hi),
        decoy_prob=args.decoy_prob, max_objects=args.max_objects,
    )
    out = resolve_out_dir(args.out)
    write_dataset(samples, out)
    print(f"wrote {len(samples)} samples to {out}")
    return 0


def _add_toggle_flags(parser):
    parser.add_argument("--ablation", choices=sorted(ABLATIONS), default=None)
    for name in TOGGLE_FIELDS:
        parser.add_argument(_flag(name), dest=name, action=argparse.BooleanOptionalAction, default=None)


class _Parser(argparse.ArgumentParser):
    """Reports usage errors on a single line with the config-error code."""

    def error(self, message):
        self.exit(ConfigError.exit_code, f"error: {ConfigError.reason}: {' '.join(message.split())}\n")


def build_parser():
    parser = _Parser(prog="tnet", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--config", help="flat key = value config file; flags override it")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="dataset root with RGB/, T/, GT/")
    p.add_argument("--split", default="test", choices=("train", "test"))
    p.add_argument("--out", required=True)
    p.add_argument("--input-size", type=int, default=None)
    _add_toggle_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="predict one RGB-T pair")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--rgb", required=True)
    p.add_argument("--thermal", required=True)
    p.add_argument("--out", required=True, help="output PNG path")
    p.add_argument("--input-size", type=int, default=None)
    _add_toggle_flags(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("synth", help="write a synthetic RGB-T dataset")
    p.add_argument("out")
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--brightness", type=float, nargs=2, default=(0.05, 1.0), metavar=("LO", "HI"))
    p.add_argument("--decoy-prob", type=float, default=0.3)
    p.add_argument("--max-objects", type=int, default=2)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except TNetError as exc:
        msg = " ".join(str(exc).split())
        print(f"error: {exc.reason}: {msg}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
