"""Simulation configurations and grid files.

A grid file is JSON or YAML holding either a list of entries or a mapping
with a "configs" list. Each entry is validated by GridEntry and turned into
an immutable SimConfig.
"""
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import yaml
from loguru import logger
from pydantic import BaseModel, Field, ValidationError as PydanticValidationError, model_validator

from ..sae.errors import SchemaError, ValidationError
from ..sae.types import Distribution, ModelParams, PsiPattern

logger = logger.bind(module="simulation.config")

TRUE_PARAMS = ModelParams(beta0=1.0, beta1=[2.0], sigma2_b=0.36)


@dataclass(frozen=True, eq=False)
class SimConfig:
    """One Monte Carlo design point."""
    a: float
    b: float
    rho: float
    n: int
    dist: Distribution = Distribution.NORMAL
    psi_pattern: PsiPattern = PsiPattern.UNEQUAL
    mc_reps: int = 1000
    seed: int = 20210917
    true_params: ModelParams = field(default_factory=lambda: TRUE_PARAMS)

    def __post_init__(self):
        object.__setattr__(self, "dist", Distribution(self.dist))
        object.__setattr__(self, "psi_pattern", PsiPattern(self.psi_pattern))
        if self.a <= 0 or self.b <= 0:
            raise ValidationError("a and b must be positive", a=self.a, b=self.b)
        if not -1.0 <= self.rho <= 1.0:
            raise ValidationError("rho must lie in [-1, 1]", rho=self.rho)
        if self.mc_reps < 1:
            raise ValidationError("mc_reps must be at least 1", mc_reps=self.mc_reps)
        if self.n < 4:
            raise ValidationError("n must be at least 4", n=self.n)
        if self.psi_pattern == PsiPattern.UNEQUAL and self.n % 4:
            raise ValidationError("n must be divisible by 4 for the unequal pattern", n=self.n)
        if self.true_params.p != 1:
            raise ValidationError("simulation supports a single covariate")

    @property
    def family(self) -> str:
        """Table family key, e.g. "normal_unequal"."""
        return f"{self.dist.value}_{self.psi_pattern.value}"

    @property
    def label(self) -> str:
        return f"a={self.a:g} b={self.b:g} rho={self.rho:g} n={self.n} {self.family}"

    def with_overrides(self, mc_reps: int | None = None, seed: int | None = None) -> "SimConfig":
        changes: dict[str, Any] = {}
        if mc_reps is not None:
            changes["mc_reps"] = mc_reps
        if seed is not None:
            changes["seed"] = seed
        return replace(self, **changes) if changes else self

    def to_dict(self) -> dict[str, Any]:
        return {
            "a": self.a,
            "b": self.b,
            "rho": self.rho,
            "n": self.n,
            "dist": self.dist.value,
            "psi_pattern": self.psi_pattern.value,
            "mc_reps": self.mc_reps,
            "seed": self.seed,
            "true_params": self.true_params.to_dict(),
        }


class GridEntry(BaseModel):
    """Schema of one grid-file entry."""
    a: float = Field(gt=0)
    b: float = Field(gt=0)
    rho: float = Field(ge=-1.0, le=1.0)
    n: int = Field(ge=4)
    dist: Distribution = Distribution.NORMAL
    psi_pattern: PsiPattern = PsiPattern.UNEQUAL
    mc_reps: int | None = Field(default=None, ge=1)
    seed: int | None = Field(default=None, ge=0)

    model_config = {"extra": "forbid"}

    @model_validator(mode="after")
    def _check_blocks(self) -> "GridEntry":
        if self.psi_pattern == PsiPattern.UNEQUAL and self.n % 4:
            raise ValueError("n must be divisible by 4 for the unequal pattern")
        return self

    def to_config(self, default_reps: int, default_seed: int) -> SimConfig:
        return SimConfig(
            a=self.a,
            b=self.b,
            rho=self.rho,
            n=self.n,
            dist=self.dist,
            psi_pattern=self.psi_pattern,
            mc_reps=self.mc_reps if self.mc_reps is not None else default_reps,
            seed=self.seed if self.seed is not None else default_seed,
        )


def _load_raw(path: Path) -> Any:
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise SchemaError(f"grid file not found: {path}", path=str(path))
    try:
        if path.suffix.lower() in (".yaml", ".yml"):
            return yaml.safe_load(text)
        return json.loads(text)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise SchemaError(f"cannot parse grid file {path}: {e}", path=str(path))


def parse_grid(
    data: Any,
    default_reps: int = 1000,
    default_seed: int = 20210917,
) -> list[SimConfig]:
    """Validate raw grid data.

    Entries without a seed get default_seed + their position, so every
    design point has its own stream.
    """
    if isinstance(data, dict):
        data = data.get("configs")
    if not isinstance(data, list) or not data:
        raise SchemaError("grid must be a non-empty list of configs or {\"configs\": [...]}")
    configs = []
    for index, raw in enumerate(data):
        try:
            entry = GridEntry.model_validate(raw)
        except PydanticValidationError as e:
            raise SchemaError(f"invalid grid entry {index}: {e.errors()[0]['msg']}", entry=index)
        configs.append(entry.to_config(default_reps, default_seed + index))
    return configs


def load_grid(
    path: str | Path,
    default_reps: int = 1000,
    default_seed: int = 20210917,
) -> list[SimConfig]:
    configs = parse_grid(_load_raw(Path(path)), default_reps, default_seed)
    logger.info(f"Loaded {len(configs)} simulation configs from {path}")
    return configs
