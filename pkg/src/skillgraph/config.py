"""Run configuration: one serializable bag of knobs plus its content hash.

A run is reproducible from its config hash and inputs, so every command logs
the hash and stamps it into the artifacts it writes.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from .updates import UpdateConfig


@dataclass
class RunConfig:
    scenario: str = ""
    theta: float = 0.5
    tau: float | None = None  # None: use the scenario default
    sigma: float | None = None
    seed: int = 0
    interp_step: float = 4.0
    distance_sequences: int = 32

    def resolve(self, scenario=None) -> "RunConfig":
        """Fill scenario-dependent defaults from a Scenario object."""
        tau = self.tau
        sigma = self.sigma
        if scenario is not None:
            if tau is None:
                tau = scenario.tau
            if sigma is None:
                sigma = scenario.sigma
        return RunConfig(
            scenario=self.scenario,
            theta=self.theta,
            tau=tau,
            sigma=sigma,
            seed=self.seed,
            interp_step=self.interp_step,
            distance_sequences=self.distance_sequences,
        )

    def update_config(self) -> UpdateConfig:
        return UpdateConfig(
            theta=self.theta,
            tau=1.0 if self.tau is None else self.tau,
            interp_step=self.interp_step,
            distance_sequences=self.distance_sequences,
            distance_seed=self.seed,
        )

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "theta": self.theta,
            "tau": self.tau,
            "sigma": self.sigma,
            "seed": self.seed,
            "interp_step": self.interp_step,
            "distance_sequences": self.distance_sequences,
        }

    def hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]
