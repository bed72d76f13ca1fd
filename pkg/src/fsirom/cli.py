"""Command line entry point.

    fsirom fom    --config c.json --out dir
    fsirom train  --snapshots dir --out model [--config c.json]
    fsirom rom    --config c.json --model model --out dir
    fsirom report --fom dir --rom dir [--out figdir]

Exit status: 0 on success, 1 on configuration or input errors, 2 when a
solver fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness
from .errors import FsiromError, IntegrationBlowup, OutOfRangeError, SolverFailure
from .mesh import SnapshotMatrix
from .rom import load_model, save_model

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2

log = logging.getLogger("fsirom")


def _config(args, mode, **extra):
    overrides = list(args.set or [])
    if args.config:
        cfg = harness.RunConfig.from_json(args.config, overrides)
    else:
        cfg = harness.RunConfig.from_dict(harness.apply_overrides({}, overrides))
    return cfg.with_(mode=mode, **extra)


def cmd_fom(args):
    cfg = _config(args, "fom-fom", out=str(args.out))
    res, F, U, timing = harness.run_fom_fom(cfg)
    log.info("fom-fom: %d steps, %d snapshots, mean %.2f subiterations",
             res.n_steps, F.n_cols, timing["mean_subiters"])
    return EXIT_OK


def cmd_train(args):
    cfg = _config(args, "train") if args.config else harness.RunConfig(mode="train")
    snap = Path(args.snapshots)
    if (snap / "snapshots").is_dir():
        snap = snap / "snapshots"
        if not args.config and (snap.parent / "config.json").exists():
            cfg = harness.RunConfig.from_json(snap.parent / "config.json", args.set).with_(mode="train")
    try:
        F = SnapshotMatrix.load(snap / "F")
        U = SnapshotMatrix.load(snap / "U")
    except OSError as exc:
        raise harness.ConfigError(f"cannot read snapshots in {snap}: {exc}") from None
    model = harness.train_from_snapshots(F, U, cfg)
    man, _ = save_model(model, args.out)
    log.info("trained r_f=%d r_u=%d on %d snapshots -> %s",
             model.basis_f.r, model.basis_u.r, F.n_cols, man)
    return EXIT_OK


def cmd_rom(args):
    cfg = _config(args, "rom-fom", out=str(args.out), model=str(args.model))
    try:
        model = load_model(args.model)
    except (OSError, KeyError, ValueError) as exc:
        raise harness.ConfigError(f"cannot load model {args.model}: {exc}") from None
    res, timing = harness.run_rom_fom(cfg, model)
    log.info("rom-fom: %d steps, mean %.2f subiterations", res.n_steps, timing["mean_subiters"])
    return EXIT_OK


def cmd_report(args):
    fom_dir, rom_dir = Path(args.fom), Path(args.rom)
    try:
        t_fom = json.loads((fom_dir / "timing.json").read_text())
        t_rom = json.loads((rom_dir / "timing.json").read_text())
        fom = harness.RunResults.read_trace(fom_dir / "trace.csv", "fom-fom")
        rom = harness.RunResults.read_trace(rom_dir / "trace.csv", "rom-fom")
    except (OSError, json.JSONDecodeError) as exc:
        raise harness.ConfigError(f"cannot read run outputs: {exc}") from None
    rep = harness.report_from_timings(t_fom, t_rom)
    out = {"timing": rep.as_dict()}
    # accuracy on the common part of the two traces
    n = min(fom.times.shape[0], rom.times.shape[0])
    if n > 1:
        t = fom.times[:n]
        t_train = float(fom.times[-1])
        lo = min(harness.TRANSIENT, t_train)
        out["err_train"] = harness.relative_l2(t, rom.p_inlet[:n], fom.p_inlet[:n], lo, t_train)
    print(json.dumps(out, indent=1))
    if args.out:
        harness._write_json(Path(args.out) / "report.json", out)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="fsirom", description="1D tube FSI with a reduced solid operator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add_cfg(sp, required=True):
        sp.add_argument("--config", required=required, help="JSON run configuration")
        sp.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override one config entry (repeatable)")

    sp = sub.add_parser("fom", help="FOM-FOM run with snapshot collection")
    add_cfg(sp)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_fom)

    sp = sub.add_parser("train", help="fit POD bases and the latent regressor")
    add_cfg(sp, required=False)
    sp.add_argument("--snapshots", required=True, help="FOM output directory or its snapshots/ subdir")
    sp.add_argument("--out", required=True, help="model path (writes <out>.rom.json and .rom.f64)")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("rom", help="ROM-FOM run")
    add_cfg(sp)
    sp.add_argument("--model", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_rom)

    sp = sub.add_parser("report", help="speedup and accuracy from two run directories")
    sp.add_argument("--fom", required=True)
    sp.add_argument("--rom", required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (SolverFailure, OutOfRangeError, IntegrationBlowup) as exc:
        print(f"fsirom: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except FsiromError as exc:
        print(f"fsirom: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
