"""Flat key=value experiment configuration.

The file format is one ``key = value`` pair per line with ``#`` comments,
chosen so configs diff cleanly and parse without any dependency.  Parsing a
serialized config reproduces it exactly (floats round-trip through repr).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .block_consensus import SCHEDULE_RULES
from .regression import SURROGATE_KINDS


class ConfigError(ValueError):
    """A configuration value violates an invariant; the message names it."""


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one experiment from a single seed."""

    n_agents: int = 10
    dim: int = 200
    blocks: int = 4
    rows_per_agent: int = 40
    graph_p: float = 0.5
    lam: float = 0.1
    theta: float = 20.0
    noise_var: float = 0.1
    sparsity: float = 0.8
    gamma0: float = 0.5
    mu: float = 1e-5
    tau_pl: float = 3.5
    tau_l: float = 4.5
    surrogate: str = "pl"
    schedule: str = "shifted_round_robin"
    box_lo: float = -10.0
    box_hi: float = 10.0
    max_iters: int = 20000
    tol: float = 1e-4
    seed: int = 42
    out: str = "out"

    def validate(self):
        """All violated invariants, each named; empty when valid."""
        problems = []
        if self.n_agents < 1:
            problems.append(f"n_agents must be >= 1, got {self.n_agents}")
        if self.dim < 1:
            problems.append(f"dim must be >= 1, got {self.dim}")
        if self.blocks < 1:
            problems.append(f"blocks must be >= 1, got {self.blocks}")
        elif self.dim >= 1 and self.dim % self.blocks != 0:
            problems.append(
                f"dim={self.dim} is not divisible by blocks={self.blocks}"
            )
        if self.rows_per_agent < 1:
            problems.append(f"rows_per_agent must be >= 1, got {self.rows_per_agent}")
        if not 0.0 <= self.graph_p <= 1.0:
            problems.append(f"graph_p must be in [0,1], got {self.graph_p}")
        if self.lam < 0.0:
            problems.append(f"lam must be >= 0, got {self.lam}")
        if self.theta <= 0.0:
            problems.append(f"theta must be > 0, got {self.theta}")
        if self.noise_var < 0.0:
            problems.append(f"noise_var must be >= 0, got {self.noise_var}")
        if not 0.0 <= self.sparsity <= 1.0:
            problems.append(f"sparsity must be in [0,1], got {self.sparsity}")
        if not 0.0 < self.gamma0 <= 1.0:
            problems.append(f"gamma0 must be in (0,1], got {self.gamma0}")
        if self.gamma0 > 0.0 and not 0.0 < self.mu < 1.0 / self.gamma0:
            problems.append(
                f"mu must be in (0, 1/gamma0={1.0 / self.gamma0:g}), got {self.mu}"
            )
        if self.tau_pl <= 0.0 or self.tau_l <= 0.0:
            problems.append("tau_pl and tau_l must be > 0")
        if self.surrogate not in SURROGATE_KINDS:
            problems.append(
                f"surrogate must be one of {SURROGATE_KINDS}, got {self.surrogate!r}"
            )
        if self.schedule not in SCHEDULE_RULES:
            problems.append(
                f"schedule must be one of {SCHEDULE_RULES}, got {self.schedule!r}"
            )
        if not self.box_lo <= self.box_hi:
            problems.append(f"box [{self.box_lo}, {self.box_hi}] is empty")
        if self.max_iters < 0:
            problems.append(f"max_iters must be >= 0, got {self.max_iters}")
        if self.tol <= 0.0:
            problems.append(f"tol must be > 0, got {self.tol}")
        return problems

    def require_valid(self):
        problems = self.validate()
        if problems:
            raise ConfigError("; ".join(problems))
        return self


# fixed labels fanning the experiment seed out into independent substreams
_LABEL_GRAPH = 1
_LABEL_DATA = 2
_LABEL_SCHEDULE = 3


def derive_seed(seed, label):
    """Deterministic independent sub-seed for a fixed purpose label."""
    return int(np.random.SeedSequence([seed, label]).generate_state(1)[0])


def graph_seed(config):
    return derive_seed(config.seed, _LABEL_GRAPH)


def data_seed(config):
    return derive_seed(config.seed, _LABEL_DATA)


def schedule_seed(config):
    return derive_seed(config.seed, _LABEL_SCHEDULE)


def serialize_config(config):
    lines = [f"{f.name} = {getattr(config, f.name)!r}"
             for f in dataclasses.fields(config)]
    return "\n".join(lines) + "\n"


def parse_config(text):
    """Parse ``key = value`` lines into an :class:`ExperimentConfig`."""
    fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in fields:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        ftype = fields[key].type
        try:
            if ftype == "int":
                values[key] = int(val)
            elif ftype == "float":
                values[key] = float(val)
            else:
                if len(val) >= 2 and val[0] == val[-1] and val[0] in "'\"":
                    val = val[1:-1]
                values[key] = val
        except ValueError:
            raise ConfigError(
                f"line {lineno}: cannot parse {val!r} as {ftype} for {key!r}"
            ) from None
    return ExperimentConfig(**values)


def save_config(config, path):
    with open(path, "w") as fh:
        fh.write(serialize_config(config))


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())
