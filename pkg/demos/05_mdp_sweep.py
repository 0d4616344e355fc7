"""A miniature end-to-end moderate-deviation sweep: the controlled process
tracks the deterministic flow, its rescaled fluctuation tracks the skeleton
solution, and the tail exponent of |Y(T)| approaches the rate function.

This is the fast, desk-side version of the persisted experiments; the CLI
(`nse-mdp thm35|prop36|mdp-tail`) runs the full-size ones and writes CSVs.

Run:  python3 demos/05_mdp_sweep.py
"""

import numpy as np

from nse_mdp.config import ExperimentConfig
from nse_mdp.experiments import run_mdp_tail, run_prop36, run_thm35

cfg = ExperimentConfig.defaults()
cfg = cfg.override("ensemble", "replicas", 60)
cfg = cfg.override("tail", "replicas", 20000)

rec = run_thm35(cfg)
print("controlled process -> deterministic flow:")
for eps, est in zip(cfg.get("scaling", "eps"), rec.diagnostics["estimates"]):
    print(f"  eps={eps:7.3g}: E sup|X-u0|^2 + E int ||X-u0||^2 = {est:.5f}")

rec = run_prop36(cfg)
print("moderate process -> skeleton solution:")
for eps, est in zip(cfg.get("scaling", "eps"), rec.diagnostics["estimates"]):
    print(f"  eps={eps:7.3g}: E sup|Y - G0(psi)|_H = {est:.4f}")

rec = run_mdp_tail(cfg)
print("tail exponent vs rate function "
      f"(radius {rec.diagnostics['radius']}, I_min = {rec.diagnostics['i_min']:.4f}):")
for eps, ell in zip(cfg.get("tail", "eps"), rec.diagnostics["ells"]):
    print(f"  eps={eps:7.3g}: ell(eps) = {ell:.4f}")
print(f"verdicts: {rec.verdicts}")
