"""Benchmark harness: per-segment metrics, aggregates with intervals, accounting and report files."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .autograd import Module
from .dataset import Mixture
from .metrics import PsdConfig, confidence_interval, pearson_cc, srrmse, trrmse

METRICS = ("cc", "trrmse", "srrmse")


@dataclass(frozen=True)
class SegmentMetrics:
    snr_db: float
    segment_id: str
    cc: float
    trrmse: float
    srrmse: float


@dataclass(frozen=True)
class Aggregate:
    mean: float
    ci_low: float
    ci_high: float
    n: int


@dataclass
class MetricsReport:
    """Everything the benchmark produces. Timing lives apart from the rest
    because it is the only field that differs between identical runs."""

    seed: int
    segments: list[SegmentMetrics] = field(default_factory=list)
    aggregates: dict[str, dict[str, Aggregate]] = field(default_factory=dict)
    baselines: dict[str, dict[str, dict[str, Aggregate]]] = field(default_factory=dict)
    mask_fraction: dict[str, float] = field(default_factory=dict)
    routing_accuracy: float | None = None
    param_counts: dict[str, int] = field(default_factory=dict)
    wall_clock: dict[str, float] = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def summary(self) -> dict:
        """The deterministic part of the report, as plain JSON-ready data."""
        return {
            "seed": self.seed,
            "aggregates": {k: {m: asdict(a) for m, a in v.items()} for k, v in self.aggregates.items()},
            "baselines": {b: {k: {m: asdict(a) for m, a in v.items()} for k, v in lv.items()}
                          for b, lv in self.baselines.items()},
            "mask_fraction": self.mask_fraction,
            "routing_accuracy": self.routing_accuracy,
            "param_counts": self.param_counts,
            "config": self.config,
        }


def segment_metrics(denoised, clean, snr_db: float = float("nan"), segment_id: str = "",
                    psd_cfg: PsdConfig = PsdConfig()) -> SegmentMetrics:
    return SegmentMetrics(float(snr_db), segment_id, pearson_cc(denoised, clean), trrmse(denoised, clean),
                          srrmse(denoised, clean, psd_cfg))


def aggregate(rows, level: float = 0.95) -> dict[str, Aggregate]:
    out = {}
    for m in METRICS:
        v = np.array([getattr(r, m) for r in rows])
        lo, hi = confidence_interval(v, level) if len(v) > 1 else (float(v.mean()), float(v.mean()))
        out[m] = Aggregate(float(v.mean()), lo, hi, len(v))
    return out


def snr_key(snr_db: float) -> str:
    return f"{float(snr_db):g}"


def run_benchmark(system, test_sets: dict[float, list[Mixture]], seed: int = 0, config: dict | None = None,
                  param_counts: dict[str, int] | None = None, psd_cfg: PsdConfig = PsdConfig(),
                  use_gate: bool = True) -> MetricsReport:
    """Run ``system`` (an AtatSystem) over each SNR's test mixtures and score it.

    With ``use_gate`` the gate routes every segment, as in deployment; without
    it the true SNR level picks the model. Raw contaminated input and AE-only
    output are scored too, as baselines on the same segments.
    """
    report = MetricsReport(seed=seed, config=dict(config or {}), param_counts=dict(param_counts or {}))
    report.baselines = {"contaminated": {}, "autoencoder": {}}
    routed = correct = 0
    for snr in sorted(test_sets):
        mixes = test_sets[snr]
        raw = np.stack([m.raw for m in mixes])
        res = system.denoise_batch(raw, fixed_snr=None if use_gate else snr)
        rows, ae_rows, raw_rows = [], [], []
        for m, out, ae, r in zip(mixes, res.output, res.ae_only, raw):
            c = m.clean.samples
            rows.append(segment_metrics(out, c, snr, m.contaminated.id, psd_cfg))
            ae_rows.append(segment_metrics(ae, c, snr, m.contaminated.id, psd_cfg))
            raw_rows.append(segment_metrics(r, c, snr, m.contaminated.id, psd_cfg))
        key = snr_key(snr)
        report.segments.extend(rows)
        report.aggregates[key] = aggregate(rows)
        report.baselines["autoencoder"][key] = aggregate(ae_rows)
        report.baselines["contaminated"][key] = aggregate(raw_rows)
        report.mask_fraction[key] = float(res.masks.mean())
        routed += len(mixes)
        correct += int(np.sum(res.snr_class == snr))
    if use_gate and system.gate is not None and routed:
        report.routing_accuracy = correct / routed
    return report


def count_parameters(models: dict[str, Module | None]) -> dict[str, int]:
    counts = {name: (m.num_parameters() if m is not None else 0) for name, m in models.items()}
    counts["total"] = sum(counts.values())
    return counts


# -- report files -------------------------------------------------------------
def write_metrics_csv(report: MetricsReport, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["snr_db", "segment_id", "cc", "trrmse", "srrmse"])
        for r in report.segments:
            w.writerow([f"{r.snr_db:g}", r.segment_id, repr(r.cc), repr(r.trrmse), repr(r.srrmse)])
    return path


def write_comparison_csv(report: MetricsReport, path, external: dict[str, dict] | None = None) -> Path:
    """One row per model, metric columns per SNR. ``external`` rows are user-supplied
    constants for published models, e.g. {"[A]": {"cc@2": 0.93, "params": 1e6}}."""
    path = Path(path)
    levels = sorted(report.aggregates, key=float)
    cols = [f"{m}@{lv}" for lv in levels for m in METRICS]
    rows = [("AT-AT", report.aggregates), ("autoencoder only", report.baselines.get("autoencoder", {})),
            ("contaminated input", report.baselines.get("contaminated", {}))]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model"] + cols + ["params"])
        total = report.param_counts.get("total", "")
        for name, agg in rows:
            vals = [f"{agg[lv][m].mean:.4f}" if lv in agg else "" for lv in levels for m in METRICS]
            w.writerow([name] + vals + [total if name == "AT-AT" else ""])
        for name, consts in (external or {}).items():
            w.writerow([name] + [consts.get(c, "") for c in cols] + [consts.get("params", "")])
    return path


def _svg_bars(title: str, groups: list[str], series: dict[str, list[float]], path: Path, ymax: float | None = None):
    # matplotlib's svg backend embeds a date and random element ids unless told not to
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    with matplotlib.rc_context({"svg.hashsalt": "atat"}):
        _draw_bars(plt, title, groups, series, path, ymax)


def _draw_bars(plt, title, groups, series, path, ymax):
    fig, ax = plt.subplots(figsize=(5, 3.2))
    width = 0.8 / max(len(series), 1)
    x = np.arange(len(groups))
    for i, (name, vals) in enumerate(series.items()):
        ax.bar(x + i * width - 0.4 + width / 2, vals, width, label=name)
    ax.set_xticks(x, [f"{g} dB" for g in groups])
    ax.set_title(title)
    if ymax is not None:
        ax.set_ylim(0, ymax)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def write_plots(report: MetricsReport, directory) -> list[Path]:
    directory = Path(directory)
    levels = sorted(report.aggregates, key=float)
    paths = []
    for m in METRICS:
        series = {"AT-AT": [report.aggregates[lv][m].mean for lv in levels]}
        for b, agg in report.baselines.items():
            series[b] = [agg[lv][m].mean for lv in levels if lv in agg]
        p = directory / f"{m}_by_snr.svg"
        _svg_bars(m, levels, series, p, 1.0 if m == "cc" else None)
        paths.append(p)
    return paths


def emit_report(report: MetricsReport, directory, external: dict | None = None) -> dict[str, Path]:
    """metrics.csv, summary.json, comparison.csv and SVG plots are deterministic;
    timing.json holds the wall clock and is the only file expected to differ between reruns."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    out = {
        "metrics": write_metrics_csv(report, directory / "metrics.csv"),
        "comparison": write_comparison_csv(report, directory / "comparison.csv", external),
    }
    summary = directory / "summary.json"
    summary.write_text(json.dumps(report.summary(), indent=2, sort_keys=True) + "\n")
    out["summary"] = summary
    timing = directory / "timing.json"
    timing.write_text(json.dumps(report.wall_clock, indent=2, sort_keys=True) + "\n")
    out["timing"] = timing
    for p in write_plots(report, directory):
        out[p.stem] = p
    return out


def timing_summary(phases: dict[str, float], preprocessing=("gate",)) -> dict[str, float]:
    total = float(sum(phases.values()))
    pre = float(sum(v for k, v in phases.items() if k in preprocessing))
    return {**{k: float(v) for k, v in phases.items()}, "total": total,
            "preprocessing_fraction": pre / total if total > 0 else 0.0}
