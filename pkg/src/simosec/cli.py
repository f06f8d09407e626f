"""Command line entry point: ``simosec <verb> [options]``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import replace

import numpy as np

from .autoenc.checkpoint import save_checkpoint
from .autoenc.train import ber_curve, eve_best_response, train
from .harness.config import AE_DECODERS, DECODERS, SCENARIOS, dump_config, load_config
from .harness.data import generate_dataset, load_dataset, save_dataset
from .harness.figures import dump_constellations, emit_plots, scatter_stats
from .harness.sweep import read_csv, run_ber_sweep, write_csv

log = logging.getLogger("simosec")


def _common(p):
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--out", help="output directory (default: $SIMOSEC_OUTPUT_DIR or config)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")


def _setup(args):
    cfg = load_config(args.config, args.seed)
    out = cfg.resolve_output_dir(args.out)
    os.makedirs(out, exist_ok=True)
    return cfg, out


def _load_messages(args, cfg):
    if getattr(args, "data", None):
        return load_dataset(args.data)
    return generate_dataset(cfg)


def cmd_gen_data(args):
    cfg, out = _setup(args)
    train_msgs, test_msgs = generate_dataset(cfg)
    save_dataset(os.path.join(out, "dataset.csv"), train_msgs, test_msgs, cfg.master_seed)
    with open(os.path.join(out, "config.txt"), "w") as f:
        f.write(dump_config(cfg))
    print(f"wrote {len(train_msgs)} training and {len(test_msgs)} test messages to {out}")


def cmd_train(args):
    cfg, out = _setup(args)
    tcfg = cfg.train
    if args.epochs is not None:
        tcfg = replace(tcfg, epochs=args.epochs)
    if args.alpha is not None:
        tcfg = replace(tcfg, alpha=args.alpha)
    imp = cfg.scenario_impairments(args.scenario)
    train_msgs, test_msgs = _load_messages(args, cfg)
    t0 = time.time()
    params, hist = train(train_msgs, tcfg, imp, cfg.channel)
    extra = {"scenario": args.scenario, "history": hist.as_dict(), "config": dump_config(cfg)}
    if args.best_response:
        params, br_hist = eve_best_response(params, train_msgs, tcfg, imp, cfg.channel)
        extra["best_response_history"] = br_hist.as_dict()
    path = args.checkpoint or os.path.join(out, f"model_{args.scenario}.npz")
    save_checkpoint(path, params, tcfg, extra)
    decoders = ("legit", "eve") + (("eve_br",) if args.best_response else ())
    curve = ber_curve(params, test_msgs, cfg.test_snr_grid_db, imp, cfg.channel, cfg.master_seed, decoders)
    summary = {d: [c.ber for c in v] for d, v in curve.items()}
    with open(os.path.join(out, f"history_{args.scenario}.json"), "w") as f:
        json.dump({"history": hist.as_dict(), "test_snr_grid_db": cfg.test_snr_grid_db, "ber": summary}, f, indent=1)
    print(f"trained in {time.time() - t0:.0f} s; checkpoint {path}")
    for d, v in summary.items():
        print(f"  {d:7s} " + " ".join(f"{b:.2e}" for b in v))


def _parse_checkpoints(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ValueError(f"--checkpoint expects SCENARIO=PATH, got {item!r}")
        scenario, path = item.split("=", 1)
        if scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {scenario!r}")
        out[scenario] = path
    return out


def cmd_sweep(args):
    cfg, out = _setup(args)
    decoders = tuple(args.decoders.split(",")) if args.decoders else cfg.decoders
    scenarios = tuple(args.scenarios.split(",")) if args.scenarios else cfg.scenarios
    checkpoints = _parse_checkpoints(args.checkpoint)
    if not checkpoints:
        decoders_ae = [d for d in decoders if d in AE_DECODERS]
        if decoders_ae and not args.decoders:
            # default decoder list includes AE ones; fall back to classical when nothing was trained
            log.warning("no checkpoints given; sweeping classical decoders only")
            decoders = tuple(d for d in decoders if d not in AE_DECODERS)
    records = run_ber_sweep(cfg, checkpoints, decoders, scenarios, args.workers)
    path = os.path.join(out, args.csv_name)
    write_csv(records, path)
    print(f"wrote {len(records)} records to {path}")


def cmd_constellations(args):
    cfg, out = _setup(args)
    rng = np.random.default_rng([cfg.master_seed, 0xC0])
    _, taps = dump_constellations(cfg.impairments, args.n, rng, out)
    st = scatter_stats(taps)
    print(f"outer/inner compression after PA: {st.outer_compression:.4f}")
    print(f"mixer IQ skew: {np.degrees(st.skew):.3f} deg, common rotation {np.degrees(st.common_rotation):.3f} deg")


def cmd_plot(args):
    cfg, out = _setup(args)
    records = read_csv(args.csv or os.path.join(out, "ber.csv"))
    for p in emit_plots(records, out):
        print(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simosec", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("gen-data", help="generate and save the message dataset")
    _common(p)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train the wiretap autoencoder")
    _common(p)
    p.add_argument("--scenario", choices=SCENARIOS, default="clean")
    p.add_argument("--epochs", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--data", help="dataset.csv from gen-data (default: regenerate from seed)")
    p.add_argument("--checkpoint", help="checkpoint path (default: <out>/model_<scenario>.npz)")
    p.add_argument("--best-response", action="store_true", help="also train a best-response eavesdropper")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="BER sweep over scenarios, decoders and SNR")
    _common(p)
    p.add_argument("--checkpoint", action="append", metavar="SCENARIO=PATH")
    p.add_argument("--decoders", help=f"comma list from {','.join(DECODERS)}")
    p.add_argument("--scenarios", help="comma list from clean,impaired")
    p.add_argument("--workers", type=int)
    p.add_argument("--csv-name", default="ber.csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("constellations", help="dump per-stage constellation scatter CSVs")
    _common(p)
    p.add_argument("--n", type=int, default=2000)
    p.set_defaults(func=cmd_constellations)

    p = sub.add_parser("plot", help="render BER CSV as SVG charts")
    _common(p)
    p.add_argument("--csv", help="sweep CSV (default: <out>/ber.csv)")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except Exception as exc:  # report and exit non-zero
        print(f"simosec {args.verb}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
