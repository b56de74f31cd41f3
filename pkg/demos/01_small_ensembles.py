# Exact dynamics of one and two emitters, compared with closed forms.
import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from lambdasr import exact, analysis
from lambdasr.model import SystemParams

# a lone atom: the upper level empties exponentially, the lower levels fill
# in the ratio of the two decay rates
p = SystemParams(1, gamma1=1.0, gamma2=0.25)
tr = exact.simulate_exact(p, 4.0, unit="physical", n_points=201)
ref = analysis.single_atom_decay(tr.times, p.gamma1, p.gamma2)
print("max |p3 - closed form| =", np.max(np.abs(tr["p3_over_N"] - ref)))
print("p1/p2 at the end       =", tr["p1_over_N"][-1] / tr["p2_over_N"][-1])

# switch on the drive on the lower doublet
driven = p.replace(rabi=1.5)
tr_d = exact.simulate_exact(driven, 4.0, unit="physical", n_points=401)
p1, p2, p3, c = analysis.single_atom_solution(tr_d.times, 1.0, 0.25, 1.5)
print("driven atom, max deviation from closed form:", np.max(np.abs(tr_d["p1_over_N"] - p1)))

# two atoms in the Dicke limit decay faster than one
pair = exact.simulate_exact(SystemParams(2, 1.0, 0.0), 4.0, unit="physical", n_points=201, dicke=True)

fig, ax = plt.subplots(1, 2, figsize=(9, 3.5))
ax[0].plot(tr.times, tr["p3_over_N"], label="one atom")
ax[0].plot(pair.times, pair["p3_over_N"], label="Dicke pair")
ax[0].set_xlabel(r"$\gamma_1 t$")
ax[0].set_ylabel("upper-level fraction")
ax[0].legend()
ax[1].plot(tr_d.times, tr_d["p1_over_N"], label="p1")
ax[1].plot(tr_d.times, tr_d["p2_over_N"], label="p2")
ax[1].plot(tr_d.times, p1, "k:", lw=1)
ax[1].set_xlabel(r"$\gamma_1 t$")
ax[1].legend()
fig.tight_layout()
fig.savefig("small_ensembles.png", dpi=120)
