"""Command-line front end.

Subcommands: synth, train, run, ber-sweep, latency-sweep, search-space.
Each takes --config <path> (flat key=value file) plus targeted
overrides. Plot emission is a convenience: when matplotlib is missing
the sweep commands print a notice and still write their CSVs.
"""
from __future__ import annotations

import argparse
import os
import sys

from .config import RunConfig, apply_overrides, load_config
from .errors import ConfigurationError
from .featuremaps import load_feature_maps, save_feature_maps, synth_dataset
from .importance import accuracy, load_head, save_head, train_head
from .pipeline import (TRIAL_HEADER, prepare, report_search_space,
                       run_ber_sweep, run_latency_sweep, run_trial, trial_row,
                       _write_csv)


def _base_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig().validate()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        overrides["trials"] = args.trials
    if getattr(args, "epsilon", None) is not None:
        overrides["epsilon"] = args.epsilon
    if getattr(args, "snr", None) is not None:
        overrides["snr_db"] = tuple(float(s) for s in args.snr.split(","))
    if getattr(args, "epsilons", None) is not None:
        overrides["epsilons"] = tuple(float(s) for s in args.epsilons.split(","))
    if getattr(args, "out", None) is not None:
        overrides["out_dir"] = args.out
    return apply_overrides(cfg, **overrides)


def _load_dataset_dir(path):
    names = sorted(n for n in os.listdir(path) if n.endswith(".semf"))
    if not names:
        raise ConfigurationError(f"no .semf files under {path}")
    return [load_feature_maps(os.path.join(path, n)) for n in names]


def _dataset_and_head(cfg, args):
    dataset = _load_dataset_dir(args.data) if getattr(args, "data", None) else None
    head = load_head(args.head) if getattr(args, "head", None) else None
    return prepare(cfg, dataset, head)


def cmd_synth(args) -> int:
    cfg = _base_config(args)
    dataset = synth_dataset(cfg.n_items, cfg.n_maps, cfg.map_shape,
                            cfg.n_classes, cfg.skew, cfg.seed)
    os.makedirs(cfg.out_dir, exist_ok=True)
    for t, item in enumerate(dataset):
        save_feature_maps(item, os.path.join(cfg.out_dir, f"item_{t:05d}.semf"))
    print(f"wrote {len(dataset)} items to {cfg.out_dir}")
    return 0


def cmd_train(args) -> int:
    cfg = _base_config(args)
    if args.data:
        dataset = _load_dataset_dir(args.data)
    else:
        dataset = synth_dataset(cfg.n_items, cfg.n_maps, cfg.map_shape,
                                cfg.n_classes, cfg.skew, cfg.seed)
    head = train_head(dataset, cfg.epochs, cfg.lr, seed=cfg.seed)
    out = args.head_out or os.path.join(cfg.out_dir, "head.semh")
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    save_head(head, out)
    print(f"trained head -> {out} (train accuracy {accuracy(head, dataset):.4f})")
    return 0


def cmd_run(args) -> int:
    cfg = _base_config(args)
    dataset, head = _dataset_and_head(cfg, args)
    item = dataset[args.item % len(dataset)]
    rec, _ = run_trial(cfg, item, head, trial=args.item,
                       snr_db=cfg.snr_db[0], epsilon=cfg.epsilon)
    for name, value in zip(TRIAL_HEADER, trial_row(rec)):
        print(f"{name} = {value}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_csv(os.path.join(args.out, "trial.csv"), TRIAL_HEADER,
                   [trial_row(rec)])
        print(f"wrote {os.path.join(args.out, 'trial.csv')}")
    return 0


def _try_plot(kind: str, out_dir: str) -> None:
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("plotting backend unavailable; skipped plot emission")
        return
    import csv

    if kind == "ber":
        path = os.path.join(out_dir, "ber_sweep.csv")
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        snr = [float(r["snr_db"]) for r in rows]
        fig, ax = plt.subplots()
        for col, style in (("ber_legit_encrypted", "o-"),
                           ("ber_legit_plaintext", "s--"), ("ber_eve", "x-")):
            ax.semilogy(snr, [max(float(r[col]), 1e-7) for r in rows], style, label=col)
        ax.set_xlabel("SNR (dB)")
        ax.set_ylabel("BER")
        ax.legend()
        ax.grid(True, which="both", alpha=0.4)
        fig.savefig(os.path.join(out_dir, "ber_sweep.png"), dpi=120)
        plt.close(fig)
    else:
        path = os.path.join(out_dir, "latency_sweep.csv")
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        eps = [float(r["epsilon"]) for r in rows]
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
        ax1.plot(eps, [float(r["mean_symbols"]) for r in rows], "o-")
        ax1.set_xlabel("epsilon")
        ax1.set_ylabel("mean payload symbols")
        ax2.plot(eps, [float(r["accuracy"]) for r in rows], "o-")
        ax2.set_xlabel("epsilon")
        ax2.set_ylabel("receiver accuracy")
        for ax in (ax1, ax2):
            ax.grid(True, alpha=0.4)
        fig.tight_layout()
        fig.savefig(os.path.join(out_dir, "latency_sweep.png"), dpi=120)
        plt.close(fig)
    print(f"wrote plot to {out_dir}")


def cmd_ber_sweep(args) -> int:
    cfg = _base_config(args)
    dataset, head = _dataset_and_head(cfg, args)
    rows, _ = run_ber_sweep(cfg, dataset, head, out_dir=cfg.out_dir)
    print(f"wrote {os.path.join(cfg.out_dir, 'ber_sweep.csv')}")
    for row in rows:
        print(f"snr={row[0]:g} dB  bits={row[2]}  legit={row[3]:.6f}  "
              f"plaintext={row[4]:.6f}  eve={row[5]:.6f}")
    if not args.no_plot:
        _try_plot("ber", cfg.out_dir)
    return 0


def cmd_latency_sweep(args) -> int:
    cfg = _base_config(args)
    dataset, head = _dataset_and_head(cfg, args)
    rows, _ = run_latency_sweep(cfg, dataset=dataset, head=head, out_dir=cfg.out_dir)
    print(f"wrote {os.path.join(cfg.out_dir, 'latency_sweep.csv')}")
    for row in rows:
        print(f"epsilon={row[0]:g}  lambda={row[1]:.3f}  symbols={row[2]:.1f}  "
              f"accuracy={row[4]:.4f}")
    if not args.no_plot:
        _try_plot("latency", cfg.out_dir)
    return 0


def cmd_search_space(args) -> int:
    cfg = _base_config(args)
    print(report_search_space(cfg))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semlink",
        description="importance-guided, keystream-encrypted OFDM transmission simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, sweep=False):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--trials", type=int, help="trial count override")
        p.add_argument("--epsilon", type=float, help="selection budget override")
        p.add_argument("--snr", help="comma-separated SNR list override (dB)")
        p.add_argument("--out", help="output directory override")
        if sweep:
            p.add_argument("--no-plot", action="store_true",
                           help="skip plot emission")
            p.add_argument("--data", help="directory of .semf items (else synthesized)")
            p.add_argument("--head", help="trained .semh head file (else trained)")

    p = sub.add_parser("synth", help="synthesize a dataset of .semf files")
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the importance head")
    common(p)
    p.add_argument("--data", help="directory of .semf items (else synthesized)")
    p.add_argument("--head-out", help="output .semh path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("run", help="single transmission, print the report")
    common(p)
    p.add_argument("--data", help="directory of .semf items (else synthesized)")
    p.add_argument("--head", help="trained .semh head file (else trained)")
    p.add_argument("--item", type=int, default=0, help="dataset item index")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("ber-sweep", help="BER vs SNR sweep with eavesdropper")
    common(p, sweep=True)
    p.set_defaults(func=cmd_ber_sweep)

    p = sub.add_parser("latency-sweep", help="selection-budget sweep")
    common(p, sweep=True)
    p.add_argument("--epsilons", help="comma-separated budget grid override")
    p.set_defaults(func=cmd_latency_sweep)

    p = sub.add_parser("search-space", help="print exact attacker search spaces")
    common(p)
    p.set_defaults(func=cmd_search_space)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
