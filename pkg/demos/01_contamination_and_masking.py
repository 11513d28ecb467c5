"""
Contamination, the CC proxy and the target mask
===============================================

Walks one segment through the front half of the pipeline: mix clean EEG with
an EMG artifact at a chosen SNR, compare the contaminated segment with a
stand-in "autoencoder output", and see which samples get masked for the
transformer. No training involved; runs in a second.
"""

import numpy as np

from atat.masking import build_mask, splice, tokenize, windowed_cc
from atat.signal import measured_snr_db, mix
from atat.synthetic import eeg_pool, emg_pool

eeg, emg = eeg_pool(1, seed=0)[0], emg_pool(1, seed=1)[0]

# mixing: lambda is chosen so the clean/artifact RMS ratio hits the target exactly
for snr in (2.0, -7.0):
    y, spec, state = mix(eeg, emg, snr)
    raw = y.samples * state.scale + state.offset
    print(f"target {snr:+.1f} dB  lambda {spec.lam:.4f}  measured {measured_snr_db(eeg.samples, raw - eeg.samples):+.6f} dB")

# y is MinMax01-normalized; pretend the autoencoder recovered the clean shape
# everywhere except a stretch where it latched onto the artifact
y, spec, state = mix(eeg, emg, 2.0)
clean01 = (eeg.samples - eeg.samples.min()) / np.ptp(eeg.samples)
ae = clean01.copy()
ae[300:380] = y.samples[300:380] + 0.3 * np.sin(np.arange(80) / 3)

# CC between input and AE output in 64-sample windows, stride 32
profile = windowed_cc(y.samples, ae)
print("window CC:", np.round(profile.cc_per_window, 2))

# every window under 0.8 masks all of its samples
mask = build_mask(profile)
print(f"masked fraction {mask.fraction:.3f}; masked runs start at",
      np.flatnonzero(np.diff(np.r_[0, mask.mask.astype(int)]) == 1))

# tokens pair the input with the AE output; masked sites are zeroed
tokens = tokenize(y.samples, ae, mask)
print("tokens", tokens.tokens.shape, "zeros at masked sites:", bool(np.all(tokens.tokens[mask.mask] == 0)))

# splice: AE outside the mask, the transformer's fill inside, an 8-sample ramp at the seams
fill = np.full(512, 0.5)
out = splice(ae, fill, mask)
print("masked samples equal the fill:", bool(np.all(out.samples[mask.mask] == 0.5)))

# the proxy compares the AE output with the *contaminated* input, so at -7 dB
# a faithful AE disagrees with its input almost everywhere and most samples are masked
y7, _, _ = mix(eeg, emg, -7.0)
print(f"same clean-shaped AE output at -7 dB: masked fraction {build_mask(windowed_cc(y7.samples, clean01)).fraction:.3f}")
