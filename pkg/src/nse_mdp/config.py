"""Experiment configuration: flat key-value text with sections.

Unknown sections or keys are rejected so that a typo cannot silently
change the physics.  Every key has a default; the shipped
``configs/default.cfg`` spells out all of them.

Key reference
-------------
[basis]     n, nu, l, dealias_factor
[grid]      t, n_steps
[initial]   u0_modes, energy_cap
[noise]     mark_weights, g_mark_weights, g0_modes, g_lin, g_cap,
            force_modes, force_profile (none|constant|sine)
[scaling]   gamma, eps (comma list, strictly decreasing)
[control]   psi_mark_weights, psi_time_profile (constant|cosine),
            psi_amplitude, m_bound, beta
[ensemble]  replicas, seed, chunk_size
[estimates] n, samples, seed
[prop33]    n_steps, osc_mark_weights
[tail]      n, t, n_steps, replicas, radius, eps, factor,
            directions_random, rate_tol, rate_max_iter, tikhonov_mu
[run]       event_budget

Mode lists use the syntax ``k1,k2:value; k1,k2:value`` with complex
values, e.g. ``1,0:0.25+0.1j; 0,1:-0.2j``.  The conjugate mode is implied.
"""

from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import ForceSpec, TimeGrid
from .noise import AffineCoefficient, MarkSpace, NoiseModel
from .spectral import Basis, SpectralField
from .stochastic import ScalingSpec


class ConfigError(ValueError):
    pass


def _parse_modes(text: str) -> dict:
    out = {}
    text = text.strip()
    if not text or text.lower() == "none":
        return out
    for item in text.split(";"):
        item = item.strip()
        if not item:
            continue
        try:
            kpart, vpart = item.split(":")
            k1, k2 = (int(x) for x in kpart.split(","))
            out[(k1, k2)] = complex(vpart.replace(" ", ""))
        except Exception as exc:
            raise ConfigError(f"cannot parse mode entry {item!r}: {exc}") from exc
    return out


def _parse_floats(text: str) -> tuple:
    return tuple(float(x) for x in text.split(","))


def _fmt_modes(modes: dict) -> str:
    return "; ".join(f"{k1},{k2}:{v}" for (k1, k2), v in sorted(modes.items()))


def _fmt_floats(vals) -> str:
    return ", ".join(repr(float(v)) for v in vals)


# (section, key) -> (parser, default, canonical formatter)
_SCHEMA = {
    ("basis", "n"): (int, 4, repr),
    ("basis", "nu"): (float, 0.5, repr),
    ("basis", "l"): (float, 2 * math.pi, repr),
    ("basis", "dealias_factor"): (float, 1.5, repr),
    ("grid", "t"): (float, 0.5, repr),
    ("grid", "n_steps"): (int, 100, repr),
    ("initial", "u0_modes"): (_parse_modes,
                              {(1, 0): 0.3 + 0.15j, (0, 1): -0.2 + 0.1j,
                               (1, 1): 0.1 + 0.0j},
                              _fmt_modes),
    ("initial", "energy_cap"): (float, 1e6, repr),
    ("noise", "mark_weights"): (_parse_floats, (4.0, 2.0), _fmt_floats),
    ("noise", "g_mark_weights"): (_parse_floats, (1.0, 0.6), _fmt_floats),
    ("noise", "g0_modes"): (_parse_modes,
                            {(1, 0): 0.25 + 0.0j, (0, 1): 0.15j},
                            _fmt_modes),
    ("noise", "g_lin"): (float, 0.2, repr),
    ("noise", "g_cap"): (int, 2, repr),
    ("noise", "force_modes"): (_parse_modes, {(1, 1): 0.08 + 0.04j}, _fmt_modes),
    ("noise", "force_profile"): (str, "sine", str),
    ("scaling", "gamma"): (float, 0.4, repr),
    ("scaling", "eps"): (_parse_floats, (0.1, 0.01, 0.001), _fmt_floats),
    ("control", "psi_mark_weights"): (_parse_floats, (1.0, -0.5), _fmt_floats),
    ("control", "psi_time_profile"): (str, "cosine", str),
    ("control", "psi_amplitude"): (float, 0.8, repr),
    ("control", "m_bound"): (float, 1.0, repr),
    ("control", "beta"): (float, 1.0, repr),
    ("ensemble", "replicas"): (int, 200, repr),
    ("ensemble", "seed"): (int, 12345, repr),
    ("ensemble", "chunk_size"): (int, 16384, repr),
    ("estimates", "n"): (int, 8, repr),
    ("estimates", "samples"): (int, 10000, repr),
    ("estimates", "seed"): (int, 777, repr),
    ("prop33", "n_steps"): (int, 4000, repr),
    ("prop33", "osc_mark_weights"): (_parse_floats, (0.5, 0.25), _fmt_floats),
    ("tail", "n"): (int, 2, repr),
    ("tail", "t"): (float, 0.3, repr),
    ("tail", "n_steps"): (int, 60, repr),
    ("tail", "replicas"): (int, 100000, repr),
    ("tail", "radius"): (float, 7.0, repr),
    ("tail", "eps"): (_parse_floats, (0.1, 0.03, 0.01), _fmt_floats),
    ("tail", "factor"): (float, 1.5, repr),
    ("tail", "directions_random"): (int, 32, repr),
    ("tail", "rate_tol"): (float, 1e-8, repr),
    ("tail", "rate_max_iter"): (int, 400, repr),
    ("tail", "tikhonov_mu"): (float, 0.0, repr),
    ("run", "event_budget"): (float, 1e7, repr),
}

_PROFILES = {"none", "constant", "sine"}
_PSI_PROFILES = {"constant", "cosine"}


@dataclass
class ExperimentConfig:
    """Validated configuration with builder methods for every component."""

    values: dict    # (section, key) -> parsed value

    # -- loading -----------------------------------------------------------

    @staticmethod
    def defaults() -> "ExperimentConfig":
        cfg = ExperimentConfig({k: v for k, (_, v, _) in _SCHEMA.items()})
        cfg.validate()
        return cfg

    @staticmethod
    def load(path) -> "ExperimentConfig":
        parser = configparser.ConfigParser(interpolation=None)
        read = parser.read(path)
        if not read:
            raise ConfigError(f"cannot read config file {path}")
        values = {k: v for k, (_, v, _) in _SCHEMA.items()}
        for section in parser.sections():
            for key in parser[section]:
                skey = (section, key)
                if skey not in _SCHEMA:
                    raise ConfigError(f"unknown config key [{section}] {key}")
                parse = _SCHEMA[skey][0]
                try:
                    values[skey] = parse(parser[section][key])
                except ConfigError:
                    raise
                except Exception as exc:
                    raise ConfigError(
                        f"bad value for [{section}] {key}: {exc}") from exc
        cfg = ExperimentConfig(values)
        cfg.validate()
        return cfg

    def get(self, section, key):
        return self.values[(section, key)]

    def override(self, section, key, value) -> "ExperimentConfig":
        vals = dict(self.values)
        vals[(section, key)] = value
        cfg = ExperimentConfig(vals)
        cfg.validate()
        return cfg

    # -- validation --------------------------------------------------------

    def validate(self):
        g = self.get
        if g("basis", "n") < 1 or g("basis", "nu") <= 0 or g("basis", "l") <= 0:
            raise ConfigError("basis requires n >= 1, nu > 0, l > 0")
        if g("grid", "n_steps") < 1 or g("grid", "t") <= 0:
            raise ConfigError("grid requires n_steps >= 1 and t > 0")
        for name in ("scaling", "tail"):
            eps = g(name, "eps")
            if not all(0 < e <= 1 for e in eps):
                raise ConfigError(f"[{name}] eps values must lie in (0, 1]")
            if any(a <= b for a, b in zip(eps, eps[1:])):
                raise ConfigError(f"[{name}] eps list must be strictly decreasing")
        if not 0 < g("scaling", "gamma") < 0.5:
            raise ConfigError("gamma must lie in (0, 1/2)")
        if g("ensemble", "replicas") < 1 or g("tail", "replicas") < 1:
            raise ConfigError("replicas must be >= 1")
        m = len(g("noise", "mark_weights"))
        for sec, key in (("noise", "g_mark_weights"),
                         ("control", "psi_mark_weights"),
                         ("prop33", "osc_mark_weights")):
            if len(g(sec, key)) != m:
                raise ConfigError(f"[{sec}] {key} must list one value per mark")
        if any(w <= 0 for w in g("noise", "mark_weights")):
            raise ConfigError("mark_weights must be positive")
        if g("noise", "force_profile") not in _PROFILES:
            raise ConfigError(f"force_profile must be one of {sorted(_PROFILES)}")
        if g("control", "psi_time_profile") not in _PSI_PROFILES:
            raise ConfigError(f"psi_time_profile must be one of {sorted(_PSI_PROFILES)}")
        if g("tail", "n") > 2:
            raise ConfigError("the tail experiment requires n <= 2")
        if not 0 < g("control", "beta") <= 1:
            raise ConfigError("beta must lie in (0, 1]")
        for modes_key, nmax in ((("initial", "u0_modes"), g("tail", "n")),
                                (("noise", "g0_modes"), g("tail", "n")),
                                (("noise", "force_modes"), g("tail", "n"))):
            for (k1, k2) in self.get(*modes_key):
                if max(abs(k1), abs(k2)) > min(nmax, g("basis", "n")):
                    raise ConfigError(
                        f"[{modes_key[0]}] {modes_key[1]} mode {(k1, k2)} exceeds "
                        "the smallest basis used by the experiments")

    # -- canonical form and hash --------------------------------------------

    def canonical(self) -> str:
        lines = []
        for (section, key), (_, _, fmt) in sorted(_SCHEMA.items()):
            lines.append(f"{section}.{key} = {fmt(self.values[(section, key)])}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def echo(self) -> dict:
        return {f"{s}.{k}": _SCHEMA[(s, k)][2](v)
                for (s, k), v in sorted(self.values.items())}

    # -- builders ------------------------------------------------------------

    def basis(self) -> Basis:
        return Basis(N=self.get("basis", "n"), nu=self.get("basis", "nu"),
                     L=self.get("basis", "l"),
                     dealias_factor=self.get("basis", "dealias_factor"))

    def estimates_basis(self) -> Basis:
        return Basis(N=self.get("estimates", "n"), nu=self.get("basis", "nu"),
                     L=self.get("basis", "l"),
                     dealias_factor=self.get("basis", "dealias_factor"))

    def tail_basis(self) -> Basis:
        return Basis(N=self.get("tail", "n"), nu=self.get("basis", "nu"),
                     L=self.get("basis", "l"),
                     dealias_factor=self.get("basis", "dealias_factor"))

    def grid(self) -> TimeGrid:
        return TimeGrid(T=self.get("grid", "t"), n_steps=self.get("grid", "n_steps"))

    def prop33_grid(self) -> TimeGrid:
        return TimeGrid(T=self.get("grid", "t"), n_steps=self.get("prop33", "n_steps"))

    def tail_grid(self) -> TimeGrid:
        return TimeGrid(T=self.get("tail", "t"), n_steps=self.get("tail", "n_steps"))

    def u0(self, basis: Basis) -> SpectralField:
        return SpectralField.from_modes(basis, self.get("initial", "u0_modes"))

    def force(self, basis: Basis) -> ForceSpec:
        modes = self.get("noise", "force_modes")
        profile = self.get("noise", "force_profile")
        if profile == "none" or not modes:
            return ForceSpec.zero(basis)
        pattern = SpectralField.from_modes(basis, modes)
        if profile == "constant":
            return ForceSpec.constant(pattern)
        return ForceSpec.sinusoidal(pattern, period=self.get("grid", "t"))

    def noise(self, basis: Basis) -> NoiseModel:
        marks = MarkSpace(weights=np.array(self.get("noise", "mark_weights")))
        g0 = SpectralField.from_modes(basis, self.get("noise", "g0_modes"))
        G = AffineCoefficient(basis, h=list(self.get("noise", "g_mark_weights")),
                              bases=g0, lin=self.get("noise", "g_lin"),
                              cap=min(self.get("noise", "g_cap"), basis.N))
        return NoiseModel(marks=marks, G=G, f=self.force(basis))

    def psi_values(self, grid: TimeGrid) -> np.ndarray:
        """Fixed bounded control psi[i, n] = amp * w_i * profile(t_n)."""
        w = np.array(self.get("control", "psi_mark_weights"))
        amp = self.get("control", "psi_amplitude")
        t = grid.times()[:-1]
        if self.get("control", "psi_time_profile") == "constant":
            prof = np.ones_like(t)
        else:
            prof = np.cos(math.pi * t / grid.T)
        return amp * np.outer(w, prof)

    def scalings(self) -> list:
        gamma = self.get("scaling", "gamma")
        return [ScalingSpec(eps=e, gamma=gamma) for e in self.get("scaling", "eps")]

    def tail_scalings(self) -> list:
        gamma = self.get("scaling", "gamma")
        return [ScalingSpec(eps=e, gamma=gamma) for e in self.get("tail", "eps")]
