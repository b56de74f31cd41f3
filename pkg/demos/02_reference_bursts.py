"""Undriven and driven bursts of 10^7 emitters.

Without drive the ensemble dumps its energy on the fast channel and the
slow channel stays dark. With omega_bar = 0.47 the fast pulse splits in two
and a strong pulse appears on the slow channel.
"""
import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from lambdasr import runner
from lambdasr.analysis import pulse_metrics
from lambdasr.scenarios import scenario

fig, axes = plt.subplots(2, 2, figsize=(10, 6), sharex="col")
for col, name in enumerate(("fig2", "fig3")):
    tr = runner.simulate(scenario(name))
    m = pulse_metrics(tr)
    print(f"{name}: I1 peaks={m.i1_peak_count}  I2/I1 peak ratio={m.i2_peak_value / m.i1_peak_value:.3g}"
          f"  final p1/N={tr['p1_over_N'][-1]:.5f}")
    t = tr.times
    keep = t > 0
    for k in (1, 2, 3):
        axes[0, col].plot(t[keep], tr[f"p{k}_over_N"][keep], label=f"p{k}/N")
    axes[1, col].plot(t[keep], tr["I1"][keep], label="I1")
    axes[1, col].plot(t[keep], tr["I2"][keep], label="I2")
    axes[1, col].set_xlabel(r"$\mu_1 N \gamma_1 t$")
    if name == "fig2":
        for ax in axes[:, col]:
            ax.set_xscale("log")
    axes[0, col].legend()
    axes[1, col].legend()

fig.tight_layout()
fig.savefig("reference_bursts.png", dpi=120)
