"""
What the adversarial term does
==============================

Same data, same autoencoder, same seeds: the generator is trained once with
the critic switched off (adv_weight 0) and once per nonzero weight, and each
run is scored on the held-out fixture segments. The spectral error (sRRMSE) is
where an adversarial critic is expected to help. About eight minutes per weight.
"""

import numpy as np

from atat.config import fixture_config
from atat.metrics import pearson_cc, srrmse, trrmse
from atat.pipeline import AtatSystem
from atat.workflow import generate_dataset, train_ae_model, train_gan_models

base = fixture_config(seed=0)
ds = generate_dataset(base)
(snr,) = base.snr_levels
ae, _ = train_ae_model(base, ds, snr)
mixes = ds.mixtures("test", snr)
raw = np.stack([m.raw for m in mixes])
clean = [m.clean.samples for m in mixes]


def score(out):
    return (np.mean([pearson_cc(o, c) for o, c in zip(out, clean)]),
            np.mean([trrmse(o, c) for o, c in zip(out, clean)]),
            np.mean([srrmse(o, c) for o, c in zip(out, clean)]))


res = AtatSystem(None, {snr: ae}).denoise_batch(raw, fixed_snr=snr)
rows = {"autoencoder only": score(res.ae_only)}
for weight in (0.0, 0.01, 1.0):
    cfg = base.override("gan.adv_weight", weight)
    gen, _, trace = train_gan_models(cfg, ds, snr, ae)
    res = AtatSystem(None, {snr: ae}, {snr: gen}).denoise_batch(raw, fixed_snr=snr)
    rows[f"adv_weight {weight:g}"] = score(res.output)
    print(f"adv_weight {weight:g}: final training recon CC {trace.recon_cc[-1]:.3f}", flush=True)

print(f"{'':18s} {'CC':>6s} {'tRRMSE':>7s} {'sRRMSE':>7s}")
for name, (c, t, s) in rows.items():
    print(f"{name:18s} {c:6.3f} {t:7.3f} {s:7.3f}")
s0 = rows["adv_weight 0"][2]
for name, (_, _, s) in rows.items():
    if name.startswith("adv_weight") and name != "adv_weight 0":
        print(f"sRRMSE change with {name}: {100 * (s - s0) / s0:+.1f}% relative to the critic switched off")
