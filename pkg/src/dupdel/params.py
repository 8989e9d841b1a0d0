"""Model parameters and regime classification."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

SUBCRITICAL = "subcritical"
CRITICAL = "critical"
SUPERCRITICAL = "supercritical"


class DomainError(ValueError):
    """A regime-specific formula was called outside its regime."""


@dataclass(frozen=True)
class ModelParams:
    """Duplication probability ``theta`` with the derived ratios.

    ``gamma = (1 - theta) / theta`` and ``beta = theta / (2 theta - 1)``;
    ``beta`` is ``None`` at the critical point.
    """

    theta: float
    gamma: float = field(init=False)
    beta: float | None = field(init=False)
    regime: str = field(init=False)

    def __post_init__(self):
        theta = float(self.theta)
        if not (0.0 < theta < 1.0) or math.isnan(theta):
            raise ValueError(f"theta must lie in (0, 1), got {self.theta!r}")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "gamma", (1.0 - theta) / theta)
        if theta == 0.5:
            object.__setattr__(self, "beta", None)
            object.__setattr__(self, "regime", CRITICAL)
        else:
            object.__setattr__(self, "beta", theta / (2.0 * theta - 1.0))
            object.__setattr__(
                self, "regime", SUBCRITICAL if theta < 0.5 else SUPERCRITICAL
            )

    @property
    def is_critical(self) -> bool:
        return self.regime == CRITICAL

    def require_beta(self) -> float:
        if self.beta is None:
            raise DomainError("beta is undefined at theta = 1/2")
        return self.beta


def as_params(theta_or_params) -> ModelParams:
    if isinstance(theta_or_params, ModelParams):
        return theta_or_params
    return ModelParams(theta_or_params)
