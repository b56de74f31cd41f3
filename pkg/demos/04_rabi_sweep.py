# Pulse energy on each channel as the drive is turned up.
import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from lambdasr.analysis import pulse_metrics
from lambdasr.meanfield import simulate
from lambdasr.model import SystemParams

wbar = np.concatenate([[1e-3], np.linspace(0.05, 1.5, 30)])
e1, e2, n1 = [], [], []
for w in wbar:
    p = SystemParams.from_ratios(10**7, 1e-8, 1e-5, 1 / 16, omega_bar=w)
    m = pulse_metrics(simulate(p, 60, unit="fast", n_points=3001))
    e1.append(m.i1_energy)
    e2.append(m.i2_energy)
    n1.append(m.i1_peak_count)

print(" omega_bar   E2/E1   I1 peaks")
for w, a, b, c in zip(wbar, e1, e2, n1):
    print(f"{w:9.3f} {b / a:8.3g} {c:6d}")

plt.figure(figsize=(6, 4))
plt.plot(wbar, e1, "o-", label="channel 1")
plt.plot(wbar, e2, "s-", label="channel 2")
plt.xlabel(r"$\Omega / (\mu_1 \gamma_1 N)$")
plt.ylabel("pulse energy (fast units)")
plt.legend()
plt.tight_layout()
plt.savefig("rabi_sweep.png", dpi=120)
