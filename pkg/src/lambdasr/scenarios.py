"""Ready-made configurations for the two reference regimes.

Both use ``N = 1e7``, ``gamma2/gamma1 = 1e-8``, ``mu2 = 1e-5`` and
``mu2/mu1 = 1/16``. ``fig2`` is undriven; ``fig3`` drives the lower
doublet at ``omega_bar = 0.47``; ``small_rabi`` uses ``omega_bar = 1e-3``.
Times are in fast units ``mu1 gamma1 N t``.
"""
from __future__ import annotations

from .config import RunConfig, parse_config

_COMMON = """\
[params]
n_atoms = 10000000
gamma1 = 1.0
gamma_ratio = 1e-8
mu2 = 1e-5
mu_ratio = 0.0625
omega_bar = {omega_bar}

[solver]
rel = 1e-10
abs = 1e-13
method = auto
seed_policy = none
"""

SCENARIOS = {
    # the undriven burst ends with p1/N near 1 only after the slow single-atom tail
    "fig2": "[run]\nmode = meanfield\n\n" + _COMMON.format(omega_bar=0.0) + """
[time]
t_end = 5000
unit = fast
n_points = 4001
spacing = log

[output]
dir = out/fig2
log_time = true
""",
    "fig3": "[run]\nmode = meanfield\n\n" + _COMMON.format(omega_bar=0.47) + """
[time]
t_end = 35
unit = fast
n_points = 3501
spacing = linear

[output]
dir = out/fig3
""",
    "small_rabi": "[run]\nmode = meanfield\n\n" + _COMMON.format(omega_bar=1e-3) + """
[time]
t_end = 5000
unit = fast
n_points = 4001
spacing = log

[output]
dir = out/small_rabi
log_time = true
""",
    "sweep": "[run]\nmode = sweep\n\n" + _COMMON.format(omega_bar=0.0) + """
[time]
t_end = 60
unit = fast
n_points = 3001

[sweep]
omega_bar = 0, 0.1, 0.47, 1.0
workers = 2

[output]
dir = out/sweep
""",
}


def scenario_text(name: str) -> str:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}") from None


def scenario(name: str, **overrides) -> RunConfig:
    """Parsed scenario; ``overrides`` maps ``"section.key"`` to a value."""
    ov = {tuple(k.split(".", 1)): v for k, v in overrides.items()}
    return parse_config(scenario_text(name), overrides=ov)
