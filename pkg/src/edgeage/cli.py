"""Command-line interface for the face-age translation pipeline.

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
Every error path prints one machine-parseable line: `error <category>: <reason>`.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import RunConfig, parse_config
from .data import ingest, split_by_age
from .edgemap import BoundingBox
from .errors import ConfigError, EdgeAgeError
from .gradsuite import run_gradient_suite
from .pipeline import ablate, infer, preprocess, train_e2e, train_e2f
from .toydata import synth_toy_data

CATEGORY = {2: "config", 3: "data", 4: "numeric"}


def _load_config(args) -> RunConfig:
    if args.config is None:
        raise ConfigError("--config is required for this command")
    cfg = parse_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "filter_interior", False):
        cfg.filter_interior = True
    return cfg.validate()


def _parse_box(text) -> BoundingBox:
    try:
        x, y, w, h = (int(v) for v in text.split(","))
        return BoundingBox(x, y, w, h)
    except (ValueError, EdgeAgeError) as exc:
        raise ConfigError(f"--box expects X,Y,W,H integers with positive extents, got {text!r}: {exc}") from exc


def cmd_synth_toy(args):
    manifest = synth_toy_data(args.n_per_group, args.seed if args.seed is not None else 0, args.out)
    print(f"toy corpus written; manifest: {manifest}")
    return 0


def cmd_ingest(args):
    entries, report = ingest(args.manifest)
    print(report.summary())
    young, old, excluded = split_by_age(entries)
    print(f"age groups: {len(young)} young, {len(old)} old, {len(excluded)} in the excluded band")
    return 0


def cmd_preprocess(args):
    cfg = _load_config(args)
    entries, report = ingest(args.manifest)
    print(report.summary())
    index, failures = preprocess(entries, cfg, args.out, filter_interior=cfg.filter_interior)
    print(f"store written to {args.out}: {len(index)} entries, {len(failures)} failures")
    return 0


def cmd_train_e2e(args):
    cfg = _load_config(args)
    rows = train_e2e(args.store, cfg, args.out)
    final = rows[-1]
    print(f"e2e training done ({len(rows)} epochs); final loss_cyc={final['loss_cyc']:.4f}")
    return 0


def cmd_train_e2f(args):
    cfg = _load_config(args)
    rows = train_e2f(args.store, cfg, args.out)
    final = rows[-1]
    print(f"e2f training done ({len(rows)} epochs); final train_L1={final['train_L1']:.4f}")
    return 0


def cmd_infer(args):
    cfg = _load_config(args)
    out = infer(args.image, args.landmarks, _parse_box(args.box), cfg, args.models,
                args.direction, args.out, save_intermediates=args.save_intermediates,
                embedding_path=args.embedding)
    print(f"synthesized face written to {out}")
    return 0


def cmd_ablate(args):
    cfg = _load_config(args)
    entries, report = ingest(args.manifest)
    print(report.summary())
    _, summary = ablate(entries, cfg, args.out)
    for row in summary:
        print(f"{row['variant']}: {row['epochs']} epochs, final train_L1={row['final_train_L1']:.4f}")
    print(f"ablation artifacts in {args.out}")
    return 0


def cmd_gradcheck(args):
    results = run_gradient_suite(seed=args.seed if args.seed is not None else 0)
    worst = 0.0
    for name, err in results:
        status = "ok" if err < 1e-3 else "FAIL"
        print(f"{name:>18}: max relative error {err:.3e}  [{status}]")
        worst = max(worst, err)
    if worst >= 1e-3:
        print("error numeric: gradient check failed", file=sys.stderr)
        return 4
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="edgeage",
                                     description="Face age translation through edge maps")
    parser.add_argument("-v", "--verbose", action="store_true", help="verbose logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-toy", help="generate the procedural toy-face corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n-per-group", type=int, default=20)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_synth_toy)

    p = sub.add_parser("ingest", help="validate a dataset manifest")
    p.add_argument("--manifest", required=True)
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("preprocess", help="build the edge-map store")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--filter-interior", action="store_true",
                   help="drop interior canny strokes from stored maps")
    p.set_defaults(fn=cmd_preprocess)

    p = sub.add_parser("train-e2e", help="train the edge-to-edge translator")
    p.add_argument("--store", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_train_e2e)

    p = sub.add_parser("train-e2f", help="train the edge-to-face synthesizer")
    p.add_argument("--store", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_train_e2f)

    p = sub.add_parser("infer", help="run the full aging chain on one face")
    p.add_argument("--image", required=True)
    p.add_argument("--landmarks", required=True)
    p.add_argument("--box", required=True, help="face box as X,Y,W,H")
    p.add_argument("--models", required=True, help="directory holding the trained checkpoints")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--direction", choices=["young-to-old", "old-to-young"], default="young-to-old")
    p.add_argument("--embedding", default=None, help="optional identity embedding file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--save-intermediates", action="store_true")
    p.set_defaults(fn=cmd_infer)

    p = sub.add_parser("ablate", help="train with and without interior canny, side by side")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--filter-interior", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(fn=cmd_ablate)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification suite")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except EdgeAgeError as exc:
        code = exc.exit_code
        category = CATEGORY.get(code, "internal")
        reason = " ".join(str(exc).split())
        print(f"error {category}: {reason}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
