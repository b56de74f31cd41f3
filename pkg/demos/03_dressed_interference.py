# Where does the slow-channel pulse come from?  Split both intensities into
# dressed-state parts and look at the coherence (cross) term.
import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from lambdasr import runner
from lambdasr.analysis import DressedDecomposition, interference_fraction
from lambdasr.scenarios import scenario

tr = runner.simulate(scenario("fig3"))
dd = DressedDecomposition(tr["d_mm"], tr["d_pp"], tr["re_cross"] + 1j * tr["im_cross"])

k = int(np.argmax(tr["I2"]))
print("at the I2 peak:")
print("  channel 1 interference share:", interference_fraction(
    DressedDecomposition(dd.d_mm[k], dd.d_pp[k], dd.cross[k]), 1))
print("  channel 2 interference share:", interference_fraction(
    DressedDecomposition(dd.d_mm[k], dd.d_pp[k], dd.cross[k]), 2))

# the cross term enters the two channels with opposite signs, so it cancels
# in the total
print("sum rule residual:", np.max(np.abs(tr["I1"] + tr["I2"] - 2 * (dd.d_mm + dd.d_pp))))

t = tr.times
plt.figure(figsize=(7, 4))
plt.plot(t, dd.d_mm + dd.d_pp, label="incoherent part")
plt.plot(t, 2 * dd.cross.real, label="2 Re cross")
plt.plot(t, tr["I2"], "k--", lw=1, label="I2")
plt.xlabel(r"$\mu_1 N \gamma_1 t$")
plt.legend()
plt.tight_layout()
plt.savefig("dressed_interference.png", dpi=120)
