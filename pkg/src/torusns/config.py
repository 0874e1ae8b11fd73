"""Scheme configuration shared by the operator, stepper and driver modules."""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field


class StepKind(str, enum.Enum):
    FORWARD_EULER = "ForwardEuler"
    TROTTER = "Trotter"
    TROTTER_DYSON = "TrotterDyson"


class Control(str, enum.Enum):
    NONE = "None"
    EXTENDED_ZERO_MODE = "ExtendedZeroMode"


class ConfigError(ValueError):
    """Raised when a configuration value is out of its admissible range."""


@dataclass(frozen=True)
class SchemeConfig:
    """Physical and numerical parameters of a run.

    ``rho`` and ``r`` are the time and space scaling factors: the viscous
    term is multiplied by ``rho * r**2`` and both nonlinear terms by
    ``rho * r``.  With ``rho = r = 1`` the unscaled equations are solved.
    """

    n: int = 2
    L: int = 4
    l: float = 1.0
    nu: float = 0.05
    T: float = 0.5
    N: int = 6
    rho: float = 1.0
    r: float = 1.0
    lam: float = 1.0
    mu: float = 0.0
    mode: StepKind = StepKind.TROTTER
    control: Control = Control.NONE
    exp_tolerance: float = 1e-14
    divergence_threshold: float = 1e6
    norm_orders: tuple[float, ...] = field(default=(0.0, 1.0, 2.0))
    error_order: float = 2.0
    bound_order: float = 1.5
    stride: int | None = None
    dyson_order: int = 2
    dyson_points: int = 4

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", StepKind(self.mode))
        object.__setattr__(self, "control", Control(self.control))
        object.__setattr__(self, "norm_orders", tuple(float(s) for s in self.norm_orders))
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if self.L < 0:
            raise ConfigError("L must be >= 0")
        if not self.l > 0:
            raise ConfigError("l must be > 0")
        if self.nu < 0:
            raise ConfigError("nu must be >= 0")
        if not self.T > 0:
            raise ConfigError("T must be > 0")
        if self.N < 0:
            raise ConfigError("N must be >= 0")
        if not (self.rho > 0 and self.r > 0):
            raise ConfigError("rho and r must be > 0")
        if not 0 < self.lam <= 1:
            raise ConfigError("lam must lie in (0, 1]")
        if self.mu < 0:
            raise ConfigError("mu must be >= 0")
        if not self.exp_tolerance > 0:
            raise ConfigError("exp_tolerance must be > 0")
        if not self.divergence_threshold > 1:
            raise ConfigError("divergence_threshold must be > 1")
        if self.stride is not None and self.stride < 1:
            raise ConfigError("stride must be >= 1")

    @property
    def dt(self) -> float:
        return self.T / 2**self.N

    @property
    def steps(self) -> int:
        return 2**self.N

    @property
    def nonlinear_factor(self) -> float:
        return self.rho * self.r

    @property
    def viscous_factor(self) -> float:
        return self.rho * self.r**2

    @property
    def blowup_order(self) -> float:
        # norm watched for blow-up: h^{n/2+1}
        return self.n / 2 + 1

    def snapshot_stride(self) -> int:
        if self.stride is not None:
            return self.stride
        return 2 ** max(self.N - 6, 0)

    def replace(self, **changes) -> "SchemeConfig":
        return dataclasses.replace(self, **changes)

    def max_stable_dt(self, c_n: float, C_data: float) -> float:
        """Step-size guidance ``dt <= 1 / (c(n) C^2)``; advisory only."""
        return 1.0 / (c_n * C_data**2)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["mode"] = self.mode.value
        d["control"] = self.control.value
        d["norm_orders"] = list(self.norm_orders)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SchemeConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "norm_orders" in kwargs:
            kwargs["norm_orders"] = tuple(kwargs["norm_orders"])
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

