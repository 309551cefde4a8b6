"""Network hyperparameter configuration."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


class Scheme(str, enum.Enum):
    VANILLA = "vanilla"
    BALANCED = "balanced"


@dataclass(frozen=True)
class NetConfig:
    """Full hyperparameter set for one ReLU ResNet.

    ``alphas``/``lambdas`` hold one coefficient pair per hidden layer; a
    constant-coefficient network is stored as ``d`` repeats of the same pair.
    """

    n_in: int
    n_out: int
    n: int
    d: int
    alphas: tuple[float, ...]
    lambdas: tuple[float, ...]
    scheme: Scheme = Scheme.VANILLA
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("n_in", "n_out", "n"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ValidationError(f"{name} must be a positive integer, got {v!r}")
        if not isinstance(self.d, int) or self.d < 0:
            raise ValidationError(f"d must be a non-negative integer, got {self.d!r}")
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "lambdas", tuple(float(l) for l in self.lambdas))
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if len(self.alphas) != self.d or len(self.lambdas) != self.d:
            raise ValidationError(
                f"need exactly d={self.d} coefficients, got "
                f"{len(self.alphas)} alphas and {len(self.lambdas)} lambdas"
            )
        if any(not math.isfinite(a) for a in self.alphas):
            raise ValidationError("alphas must be finite")
        if any(not (l > 0.0 and math.isfinite(l)) for l in self.lambdas):
            raise ValidationError("all lambdas must be finite and > 0")
        if not (0 <= int(self.seed) < 2**64):
            raise ValidationError("seed must fit in 64 unsigned bits")

    @classmethod
    def constant(
        cls,
        *,
        n_in: int = 1,
        n_out: int = 1,
        n: int,
        d: int,
        alpha: float,
        lam: float,
        scheme: Scheme | str = Scheme.VANILLA,
        seed: int = 0,
    ) -> "NetConfig":
        """Build a constant-coefficient configuration."""
        return cls(
            n_in=n_in,
            n_out=n_out,
            n=n,
            d=d,
            alphas=(alpha,) * d,
            lambdas=(lam,) * d,
            scheme=Scheme(scheme),
            seed=seed,
        )

    @property
    def is_constant(self) -> bool:
        """True when every hidden layer shares the same (alpha, lambda)."""
        if self.d <= 1:
            return True
        return len(set(self.alphas)) == 1 and len(set(self.lambdas)) == 1

    @property
    def alpha(self) -> float:
        if self.d == 0 or not self.is_constant:
            raise ValidationError("alpha is only defined for constant-coefficient configs with d >= 1")
        return self.alphas[0]

    @property
    def lam(self) -> float:
        if self.d == 0 or not self.is_constant:
            raise ValidationError("lambda is only defined for constant-coefficient configs with d >= 1")
        return self.lambdas[0]

    @property
    def prefactor_log(self) -> float:
        """Sum over layers of ln(alpha^2 + lambda^2)."""
        a = np.asarray(self.alphas)
        l = np.asarray(self.lambdas)
        return float(np.sum(np.log(a * a + l * l)))

    def replace(self, **kwargs) -> "NetConfig":
        fields = dict(
            n_in=self.n_in,
            n_out=self.n_out,
            n=self.n,
            d=self.d,
            alphas=self.alphas,
            lambdas=self.lambdas,
            scheme=self.scheme,
            seed=self.seed,
        )
        fields.update(kwargs)
        return NetConfig(**fields)

    def to_dict(self) -> dict:
        return {
            "n_in": self.n_in,
            "n_out": self.n_out,
            "n": self.n,
            "d": self.d,
            "alphas": list(self.alphas),
            "lambdas": list(self.lambdas),
            "scheme": self.scheme.value,
            "seed": int(self.seed),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NetConfig":
        return cls(
            n_in=int(data["n_in"]),
            n_out=int(data["n_out"]),
            n=int(data["n"]),
            d=int(data["d"]),
            alphas=tuple(data["alphas"]),
            lambdas=tuple(data["lambdas"]),
            scheme=Scheme(data["scheme"]),
            seed=int(data.get("seed", 0)),
        )


INV_SQRT2 = 1.0 / math.sqrt(2.0)
