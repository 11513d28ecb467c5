"""``atat`` command line: generate, train-all, train-ae, train-gan, train-gate, denoise, eval.

Precedence: built-in defaults < --config file < --set KEY=VALUE < dedicated flags.
Exit codes: 0 success, 1 usage or configuration, 2 data error, 3 numeric divergence.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--seed", type=int, help="root seed for every random stream")
    common.add_argument("--snr", help="comma-separated SNR levels in dB, e.g. -7,2")
    common.add_argument("--data-dir", type=Path, help="dataset directory (manifest.json inside)")
    common.add_argument("--out", type=Path, help="base directory for timestamped run directories")
    common.add_argument("--run-dir", type=Path, help="exact run directory to use instead of a new one")
    common.add_argument("--threads", type=int, help="BLAS threads (default 1, for determinism)")
    common.add_argument("--skip-gan", action="store_true", default=None, help="autoencoder-only ablation")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key, e.g. gan.epochs=3 (repeatable)")

    p = _Parser(prog="atat", description="Autoencoder-targeted adversarial transformer EEG denoising")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    g = sub.add_parser("generate", parents=[common], help="build semi-synthetic train/test mixtures")
    g.add_argument("--source", choices=["synthetic", "fixture", "files"])
    g.add_argument("--eeg-pool", type=Path, help=".npy or .csv of clean segments (N, 512)")
    g.add_argument("--emg-pool", type=Path, help=".npy or .csv of artifact segments (N, 512)")
    for name, helptext in (("train-all", "gate, per-SNR autoencoders, per-SNR GANs"),
                           ("train-gate", "SNR gate only"), ("train-ae", "per-SNR autoencoders only"),
                           ("train-gan", "per-SNR GANs on existing autoencoders")):
        t = sub.add_parser(name, parents=[common], help=helptext)
        t.add_argument("--checkpoints", type=Path, help="directory holding upstream autoencoder checkpoints")
    d = sub.add_parser("denoise", parents=[common], help="denoise raw segments from a .npy/.csv file")
    d.add_argument("input", type=Path)
    d.add_argument("--output", type=Path)
    d.add_argument("--checkpoints", type=Path, required=True)
    e = sub.add_parser("eval", parents=[common], help="benchmark trained checkpoints on the test split")
    e.add_argument("--checkpoints", type=Path, required=True)
    return p


def resolve_config(args):
    from .config import RunConfig
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise _UsageError(f"--set expects KEY=VALUE, got {item!r}")
        cfg = cfg.override(key.strip(), value.strip())
    flags = {"seed": args.seed, "snr_levels": args.snr, "data_dir": args.data_dir and str(args.data_dir),
             "out": args.out and str(args.out), "threads": args.threads, "skip_gan": args.skip_gan}
    for key, value in flags.items():
        if value is not None:
            cfg = cfg.override(key, value)
    for key, attr in (("data.source", "source"), ("data.eeg_pool", "eeg_pool"), ("data.emg_pool", "emg_pool")):
        value = getattr(args, attr, None)
        if value is not None:
            cfg = cfg.override(key, str(value))
    if getattr(args, "eeg_pool", None) and getattr(args, "source", None) is None:
        cfg = cfg.override("data.source", "files")
    return RunConfig.from_dict(cfg.to_dict())  # re-validate after overrides


class _UsageError(Exception):
    pass


def make_run_dir(cfg, explicit: Path | None) -> Path:
    if explicit is not None:
        explicit.mkdir(parents=True, exist_ok=True)
        return explicit
    base = Path(cfg.out)
    stem = f"{time.strftime('%Y%m%d-%H%M%S')}-seed{cfg.seed}"
    run = base / stem
    n = 1
    while run.exists():
        run = base / f"{stem}-{n}"
        n += 1
    run.mkdir(parents=True)
    return run


def _dataset(cfg, run: Path, log):
    from .dataset import load_dataset, save_dataset
    from .workflow import generate_dataset
    if cfg.data_dir:
        return load_dataset(cfg.data_dir)
    log("no --data-dir given: generating the dataset into the run directory first")
    ds = generate_dataset(cfg)
    save_dataset(ds, run / "dataset")
    return ds


def cmd_generate(cfg, args, run: Path, log) -> int:
    from .dataset import save_dataset
    from .workflow import generate_dataset, snr_verification_error
    ds = generate_dataset(cfg)
    manifest = save_dataset(ds, run / "dataset")
    for split in ("train", "test"):
        for snr in cfg.snr_levels:
            log(f"{split:5s} {snr:+g} dB: {len(ds.records(split, snr))} pairs")
    log(f"SNR verification: max |measured - target| = {snr_verification_error(ds):.2e} dB")
    log(f"dataset written to {manifest.parent}")
    return EXIT_OK


def cmd_train(cfg, args, run: Path, log) -> int:
    import shutil
    from .bench import timing_summary
    from .workflow import ae_path, train_all
    phases = {"train-all": ("gate", "ae", "gan"), "train-gate": ("gate",), "train-ae": ("ae",),
              "train-gan": ("gan",)}[args.command]
    if args.command == "train-gan" and cfg.skip_gan:
        raise _UsageError("train-gan with --skip-gan does nothing")
    ds = _dataset(cfg, run, log)
    if "ae" not in phases:
        src = args.checkpoints or run / "checkpoints"
        (run / "checkpoints").mkdir(parents=True, exist_ok=True)
        for snr in cfg.snr_levels:
            a, b = ae_path(Path(src), snr), ae_path(run / "checkpoints", snr)
            if a.exists() and a.resolve() != b.resolve():
                shutil.copyfile(a, b)
    res = train_all(cfg, ds, run, phases, log)
    timing = timing_summary(res.phases)
    (run / "timing.json").write_text(json.dumps(timing, indent=2, sort_keys=True) + "\n")
    (run / "param_counts.json").write_text(json.dumps(res.param_counts, indent=2, sort_keys=True) + "\n")
    log(f"training wall clock {timing['total']:.1f}s, pre-processing (gate) share "
        f"{100 * timing['preprocessing_fraction']:.1f}%")
    log(f"checkpoints in {run / 'checkpoints'}")
    return EXIT_OK


def cmd_denoise(cfg, args, run: Path, log) -> int:
    import numpy as np
    from .dataset import read_csv_rows, write_csv_rows
    from .errors import IoError
    from .workflow import load_system
    if not args.input.exists():
        raise IoError(f"{args.input}: no such file")
    x = np.load(args.input) if args.input.suffix == ".npy" else read_csv_rows(args.input)
    system = load_system(cfg, args.checkpoints)
    res = system.denoise_batch(np.atleast_2d(x))
    out = args.output or run / "denoised.csv"
    write_csv_rows(out, res.output)
    write_csv_rows(run / "masks.csv", res.masks.astype(float))
    log(f"{len(res.output)} segments denoised; mean masked fraction {res.masks.mean():.3f}; "
        f"routed to {sorted(set(float(v) for v in res.snr_class))} dB")
    log(f"output written to {out}")
    return EXIT_OK


def cmd_eval(cfg, args, run: Path, log) -> int:
    from .bench import emit_report
    from .workflow import evaluate, load_system
    if not cfg.data_dir:
        raise _UsageError("eval needs --data-dir")
    ds = _dataset(cfg, run, log)
    system = load_system(cfg, args.checkpoints)
    timing_file = Path(args.checkpoints).parent / "timing.json"
    phases = {}
    if timing_file.exists():
        t = json.loads(timing_file.read_text())
        phases = {k: v for k, v in t.items() if k not in ("total", "preprocessing_fraction")}
    report = evaluate(cfg, ds, system, phases)
    files = emit_report(report, run / "report")
    for key, agg in report.aggregates.items():
        log(f"{key:>4s} dB: CC {agg['cc'].mean:.3f} [{agg['cc'].ci_low:.3f}, {agg['cc'].ci_high:.3f}]  "
            f"tRRMSE {agg['trrmse'].mean:.3f}  sRRMSE {agg['srrmse'].mean:.3f}")
    if report.routing_accuracy is not None:
        log(f"gate routing accuracy {report.routing_accuracy:.3f}")
    log(f"parameters: {report.param_counts}")
    log(f"report written to {files['metrics'].parent}")
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "train-all": cmd_train, "train-gate": cmd_train, "train-ae": cmd_train,
            "train-gan": cmd_train, "denoise": cmd_denoise, "eval": cmd_eval}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    from .errors import AtatError, ConfigError, DivergenceError, InvalidConfig

    def log(msg):
        print(msg, flush=True)

    try:
        cfg = resolve_config(args)
        from threadpoolctl import threadpool_limits
        run = make_run_dir(cfg, args.run_dir)
        cfg.save(run / "config.json")
        log(f"run directory {run}")
        with threadpool_limits(limits=cfg.threads):
            return COMMANDS[args.command](cfg, args, run, log)
    except _UsageError as e:
        print(f"atat: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as e:
        print(f"atat: training diverged: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ConfigError, InvalidConfig) as e:
        print(f"atat: configuration error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (AtatError, OSError) as e:
        print(f"atat: data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
