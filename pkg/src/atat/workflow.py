"""End-to-end steps shared by the command line and the narrative demos.

Seed splitting: every random stream is seeded with ``derive_seed(seed, name)``
for a fixed name ("data", "gate", "ae:-7", "gan:2", ...), so any single step
can be rerun in isolation and lands on the same numbers.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .adversarial import DiscriminatorModel, GanConfig, GeneratorModel, GanTrace, gan_train
from .autoencoder import AutoencoderModel, TrainTrace, ae_train, denoise_batch
from .autograd import load_checkpoint, save_checkpoint
from .bench import MetricsReport, count_parameters, run_benchmark, timing_summary
from .config import RunConfig, derive_seed
from .dataset import Dataset, MixRecord, load_pool
from .errors import ConfigError, InvalidDataset
from .gate import GateModel, GateTrace, SnrClassSet, gate_train
from .pipeline import AtatSystem, MaskConfig, ae_stream, prepare_tokens
from .signal import NormMode, SegmentKind, measured_snr_db, normalize, select_high_variance
from .synthetic import eeg_pool, emg_pool, sinusoid_burst_pools


def snr_tag(snr_db: float) -> str:
    return f"{float(snr_db):g}"


# -- data -------------------------------------------------------------------
def source_pools(cfg: RunConfig):
    d = cfg.data
    if d.source == "files":
        return (load_pool(d.eeg_pool, SegmentKind.CLEAN_EEG, "eeg"),
                load_pool(d.emg_pool, SegmentKind.EMG_ARTIFACT, "emg"))
    seed = derive_seed(cfg.seed, "pools")
    if d.source == "fixture":
        return sinusoid_burst_pools(max(d.synthetic_eeg, d.synthetic_emg), seed)
    return eeg_pool(d.synthetic_eeg, seed, "eeg"), emg_pool(d.synthetic_emg, seed + 1, "emg")


def generate_dataset(cfg: RunConfig, pools=None) -> Dataset:
    """Disjoint train/test sources; training artifacts drawn from the high-variance quartile.

    Every SNR level reuses the same clean segments (one mixture per level),
    with an independent artifact draw per level.
    """
    eeg, emg = pools if pools is not None else source_pools(cfg)
    d = cfg.data
    rng = np.random.default_rng(derive_seed(cfg.seed, "data"))
    if len(eeg) < d.n_train + d.n_test:
        raise InvalidDataset(f"need {d.n_train + d.n_test} clean segments, pool has {len(eeg)}")
    eeg_order = rng.permutation(len(eeg))
    emg_order = rng.permutation(len(emg))
    half = len(emg) // 2
    emg_train = [emg[i] for i in emg_order[:half]]
    emg_test = [emg[i] for i in emg_order[half:]]
    if cfg.data.source != "fixture":
        emg_train = select_high_variance(emg_train, d.emg_quantile)
    if len(emg_train) < d.n_train or len(emg_test) < d.n_test:
        raise InvalidDataset(
            f"artifact pool too small: {len(emg_train)} train / {len(emg_test)} test usable, "
            f"need {d.n_train} / {d.n_test}")
    ds = Dataset(seed=cfg.seed)
    splits = {"train": [eeg[i] for i in eeg_order[:d.n_train]],
              "test": [eeg[i] for i in eeg_order[d.n_train:d.n_train + d.n_test]]}
    for split, clean in splits.items():
        noise_pool = emg_train if split == "train" else emg_test
        for seg in clean:
            ds.add(seg)
        for snr in cfg.snr_levels:
            pick = rng.choice(len(noise_pool), size=len(clean), replace=False)
            for seg, j in zip(clean, pick):
                art = ds.add(noise_pool[j])
                ds.pairs.append(MixRecord(seg.id, art.id, snr, split))
    return ds


def snr_verification_error(ds: Dataset) -> float:
    """Largest |measured - target| SNR over every pair in the dataset, in dB."""
    worst = 0.0
    for m in ds.mixtures():
        artifact = m.raw - m.clean.samples
        worst = max(worst, abs(measured_snr_db(m.clean.samples, artifact) - m.spec.snr_db))
    return worst


# -- training -----------------------------------------------------------------
def train_gate_model(cfg: RunConfig, ds: Dataset) -> tuple[GateModel, GateTrace]:
    g = cfg.gate
    model = GateModel(SnrClassSet(cfg.snr_levels), seed=derive_seed(cfg.seed, "gate"), hidden=g.hidden,
                      cnn_filters=g.cnn_filters, mlp_filters=g.mlp_filters, dense=g.dense)
    examples = [(normalize(m.raw, NormMode.ZSCORE)[0], m.spec.snr_db)
                for snr in cfg.snr_levels for m in ds.mixtures("train", snr)]
    batch = min(g.batch, len(examples))
    return gate_train(model, examples, g.epochs, batch, g.lr, seed=derive_seed(cfg.seed, "gate-train"))


def train_ae_model(cfg: RunConfig, ds: Dataset, snr: float) -> tuple[AutoencoderModel, TrainTrace]:
    a = cfg.ae
    tag = snr_tag(snr)
    model = AutoencoderModel(seed=derive_seed(cfg.seed, f"ae:{tag}"), dropout=a.dropout)
    pairs = [(m.contaminated, m.clean) for m in ds.mixtures("train", snr)]
    return ae_train(model, pairs, a.epochs, a.batch, a.lr, seed=derive_seed(cfg.seed, f"ae-train:{tag}"))


def gan_dataset(cfg: RunConfig, ds: Dataset, snr: float, ae: AutoencoderModel):
    mixes = ds.mixtures("train", snr)
    x = np.stack([m.contaminated.samples for m in mixes])
    out = ae_stream(denoise_batch(ae, x))
    mask = MaskConfig(**vars(cfg.mask))
    return [(prepare_tokens(xi, oi, mask), m.clean) for xi, oi, m in zip(x, out, mixes)]


def train_gan_models(cfg: RunConfig, ds: Dataset, snr: float, ae: AutoencoderModel):
    g = cfg.gan
    tag = snr_tag(snr)
    gen = GeneratorModel(seed=derive_seed(cfg.seed, f"gen:{tag}"))
    disc = DiscriminatorModel(seed=derive_seed(cfg.seed, f"disc:{tag}"))
    gcfg = GanConfig(g.cycles_per_iteration, g.epochs, g.batch, g.lr, g.adv_weight, g.recon_weight,
                     cfg.mask.crossfade, derive_seed(cfg.seed, f"gan-train:{tag}"))
    return gan_train(gen, disc, gan_dataset(cfg, ds, snr, ae), gcfg)


# -- checkpoints --------------------------------------------------------------
def gate_path(d: Path) -> Path:
    return d / "gate.ckpt"


def ae_path(d: Path, snr: float) -> Path:
    return d / f"ae_{snr_tag(snr)}dB.ckpt"


def gan_path(d: Path, snr: float) -> Path:
    return d / f"gan_{snr_tag(snr)}dB.ckpt"


def save_gate(model: GateModel, path) -> Path:
    state = model.state_dict("gate")
    state["gate.classes"] = np.array(model.classes.levels, dtype=np.float32)
    return save_checkpoint(path, state)


def save_ae(model: AutoencoderModel, path) -> Path:
    return save_checkpoint(path, model.state_dict("ae"))


def save_gan(gen: GeneratorModel, disc: DiscriminatorModel, path) -> Path:
    state = gen.state_dict("gen")
    state.update(disc.state_dict("disc"))
    return save_checkpoint(path, state)


def load_gate(cfg: RunConfig, path) -> GateModel:
    state = load_checkpoint(path)
    if "gate.classes" not in state:
        raise ConfigError(f"{path}: gate checkpoint has no class table")
    g = cfg.gate
    model = GateModel(SnrClassSet(tuple(float(v) for v in state["gate.classes"])), hidden=g.hidden,
                      cnn_filters=g.cnn_filters, mlp_filters=g.mlp_filters, dense=g.dense)
    _load(model, state, "gate", path)
    return model.eval()


def load_ae(cfg: RunConfig, path) -> AutoencoderModel:
    model = AutoencoderModel(dropout=cfg.ae.dropout)
    _load(model, load_checkpoint(path), "ae", path)
    return model.eval()


def load_generator(path) -> GeneratorModel:
    model = GeneratorModel()
    _load(model, load_checkpoint(path), "gen", path)
    return model.eval()


def _load(model, state, prefix, path):
    try:
        model.load_state_dict(state, prefix)
    except (KeyError, ValueError) as e:
        raise ConfigError(f"{path}: checkpoint does not match the configured model ({e})") from e


def load_system(cfg: RunConfig, ckpt_dir, use_gan: bool | None = None) -> AtatSystem:
    """Assemble an AtatSystem from a checkpoint directory; every missing file is a ConfigError."""
    ckpt_dir = Path(ckpt_dir)
    use_gan = not cfg.skip_gan if use_gan is None else use_gan
    gate = load_gate(cfg, gate_path(ckpt_dir)) if len(cfg.snr_levels) > 1 else None
    aes, gens = {}, {}
    for snr in cfg.snr_levels:
        aes[snr] = load_ae(cfg, ae_path(ckpt_dir, snr))
        if use_gan:
            gens[snr] = load_generator(gan_path(ckpt_dir, snr))
    return AtatSystem(gate, aes, gens, MaskConfig(**vars(cfg.mask)))


# -- orchestration --------------------------------------------------------------
@dataclass
class TrainResult:
    checkpoints: dict[str, Path] = field(default_factory=dict)
    traces: dict[str, Path] = field(default_factory=dict)
    phases: dict[str, float] = field(default_factory=dict)
    param_counts: dict[str, int] = field(default_factory=dict)


def train_all(cfg: RunConfig, ds: Dataset, out_dir, phases=("gate", "ae", "gan"), log=print) -> TrainResult:
    """Gate, then the per-SNR autoencoders, then the per-SNR GANs; wall clock per phase."""
    out_dir = Path(out_dir)
    ck = out_dir / "checkpoints"
    tr = out_dir / "traces"
    ck.mkdir(parents=True, exist_ok=True)
    tr.mkdir(parents=True, exist_ok=True)
    res = TrainResult()
    models = {}
    if "gate" in phases and len(cfg.snr_levels) > 1:
        t0 = time.perf_counter()
        gate, trace = train_gate_model(cfg, ds)
        res.phases["gate"] = time.perf_counter() - t0
        res.checkpoints["gate"] = save_gate(gate, gate_path(ck))
        res.traces["gate"] = trace.to_csv(tr / "gate_accuracy.csv")
        models["gate"] = gate
        log(f"gate: {res.phases['gate']:.1f}s, final train accuracy {trace.epoch_accuracy[-1]:.3f}")
    aes = {}
    for snr in cfg.snr_levels:
        tag = snr_tag(snr)
        if "ae" in phases:
            t0 = time.perf_counter()
            ae, trace = train_ae_model(cfg, ds, snr)
            res.phases[f"ae:{tag}"] = time.perf_counter() - t0
            res.checkpoints[f"ae:{tag}"] = save_ae(ae, ae_path(ck, snr))
            _write_losses(tr / f"ae_{tag}dB_loss.csv", trace.epoch_loss)
            log(f"ae {tag} dB: {res.phases[f'ae:{tag}']:.1f}s, final loss {trace.epoch_loss[-1]:.4f}")
        else:
            ae = load_ae(cfg, ae_path(ck, snr))
        aes[snr] = ae
        models[f"ae:{tag}"] = ae
    if "gan" in phases and not cfg.skip_gan:
        for snr in cfg.snr_levels:
            tag = snr_tag(snr)
            t0 = time.perf_counter()
            gen, disc, trace = train_gan_models(cfg, ds, snr, aes[snr])
            res.phases[f"gan:{tag}"] = time.perf_counter() - t0
            res.checkpoints[f"gan:{tag}"] = save_gan(gen, disc, gan_path(ck, snr))
            res.traces[f"gan:{tag}"] = trace.to_csv(tr / f"gan_{tag}dB_loss.csv")
            models[f"gen:{tag}"], models[f"disc:{tag}"] = gen, disc
            log(f"gan {tag} dB: {res.phases[f'gan:{tag}']:.1f}s, {trace.gen_steps} generator / "
                f"{trace.disc_steps} discriminator steps, final recon CC {trace.recon_cc[-1]:.3f}")
    res.param_counts = count_parameters(models)
    return res


def _write_losses(path: Path, losses):
    path.write_text("epoch,loss\n" + "".join(f"{i},{v!r}\n" for i, v in enumerate(losses)))


def system_param_counts(system: AtatSystem) -> dict[str, int]:
    models = {}
    if system.gate is not None:
        models["gate"] = system.gate
    for snr, ae in system.autoencoders.items():
        models[f"ae:{snr_tag(snr)}"] = ae
    for snr, g in system.generators.items():
        models[f"gen:{snr_tag(snr)}"] = g
        models[f"disc:{snr_tag(snr)}"] = DiscriminatorModel()  # critic is training-only; counted for footprint
    return count_parameters(models)


def evaluate(cfg: RunConfig, ds: Dataset, system: AtatSystem, phases: dict[str, float] | None = None) -> MetricsReport:
    t0 = time.perf_counter()
    tests = {snr: ds.mixtures("test", snr) for snr in cfg.snr_levels}
    report = run_benchmark(system, tests, seed=cfg.seed, config=cfg.hyperparameters(),
                           param_counts=system_param_counts(system), use_gate=system.gate is not None)
    report.wall_clock = timing_summary(dict(phases or {}))
    report.wall_clock["eval"] = time.perf_counter() - t0
    return report
