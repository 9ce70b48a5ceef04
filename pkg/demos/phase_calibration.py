# coding: utf-8

# # Sanitizing CSI phase
#
# Reported phase carries a per-packet linear ramp across subcarriers and a
# random offset. Unwrapping and subtracting the endpoint slope and the mean
# removes both.
#
# Run:  python demos/phase_calibration.py

# %%
import numpy as np

from csihdfm.phase import PAPER_IDEAL, STANDARD_NG2, calibrate, unwrap

rng = np.random.default_rng(1)
m = STANDARD_NG2.array
true_phase = 0.3 * np.sin(m / 6.0)

# %% [markdown]
# Five packets, each with its own slope and offset, then wrapped to (-pi, pi].

# %%
packets = []
for _ in range(5):
    slope, offset = rng.uniform(-0.25, 0.25), rng.uniform(-np.pi, np.pi)
    packets.append(np.angle(np.exp(1j * (true_phase + slope * m + offset))))
packets = np.array(packets)
print("raw spread per subcarrier:", packets.std(axis=0).mean().round(3))

# %%
cal = np.array([calibrate(unwrap(p), STANDARD_NG2)[0] for p in packets])
print("calibrated spread per subcarrier:", cal.std(axis=0).max())
print("endpoints equal:", bool(np.all(cal[:, 0] == cal[:, -1])))

# %% [markdown]
# With the real index set the subcarrier indices do not sum to zero, so a
# leftover constant proportional to the slope survives; the idealized
# symmetric set removes it entirely.

# %%
alpha = 0.2
a = calibrate(true_phase + alpha * m, STANDARD_NG2)[0] - calibrate(true_phase, STANDARD_NG2)[0]
print("standard set leftover:", a[:3], "expected", -alpha * 13 / 30)
mi = PAPER_IDEAL.array
b = calibrate(true_phase + alpha * mi, PAPER_IDEAL)[0] - calibrate(true_phase, PAPER_IDEAL)[0]
print("zero-sum set leftover:", np.abs(b).max())
