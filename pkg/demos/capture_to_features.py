# coding: utf-8

# # From capture files to feature vectors
#
# Writes a small set of synthetic Intel 5300 style captures, reads them
# back through the manifest, calibrates phase and extracts pooled factor
# features for both channel kinds.
#
# Run:  python demos/capture_to_features.py

# %%
import tempfile
from pathlib import Path

import numpy as np

from csihdfm.ingest import load_dataset, read_log_file, read_manifest
from csihdfm.pipeline import FeatureConfig, build_features, sample_channels
from csihdfm.synthetic import ActivitySpec, write_capture_dataset

work = Path(tempfile.mkdtemp(prefix="csihdfm-demo-"))
manifest = write_capture_dataset(work, ActivitySpec(n_per_class=3, n=270, t=300, seed=0))
print(manifest.read_text().splitlines()[:3])

# %% [markdown]
# One capture, parsed frame by frame.

# %%
first = sorted(work.glob("*.dat"))[0]
res = read_log_file(first)
f = res.frames[0]
print(first.name, len(res.frames), "frames;", f.n_tx, "x", f.n_rx, "links; rssi", f.rssi_a, f.rssi_b, f.rssi_c)
print("csi shape", f.csi.shape, "first entries", f.csi[0, 0, :])

# %% [markdown]
# The whole manifest, scaled to absolute units, as amplitude and calibrated phase matrices.

# %%
loaded, errors = load_dataset(read_manifest(manifest))
print(len(loaded), "recordings,", len(errors), "errors")
samples = [sample_channels(s, "both") for s in loaded]
amp, phase = samples[0].channels
print("amplitude", amp.shape, "phase", phase.shape, "first row label", amp.row_labels[0])

# %%
fs, counts, diag = build_features(samples, FeatureConfig(pool_length=30))
print("factors per channel", counts, "feature matrix", fs.features.shape)
for d in diag[:4]:
    print(d.sample_id, d.channel, "p_star", d.p_star, "spikes", d.spike_counts)
print("feature range", np.round([fs.features.min(), fs.features.max()], 3))
