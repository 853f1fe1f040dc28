"""
Pydantic models for manifest validation and report envelopes.

Manifests arrive as plain key/value strings; these models coerce and check
every parameter before any computation starts. Unknown keys are errors.
"""

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, validator


EXPERIMENT_KINDS = (
    "spectrum", "splitting", "leaf", "density", "ubd", "holonomy", "periodic",
    "rigidity", "sweep", "center-topology", "center-inequality", "qi",
)
LIST_FIELDS = ("R", "epsilons", "du", "offsets", "radii", "iterates")


def split_list(value: Any) -> Any:
    """Turn "1, 5, 25" or "1 5 25" into a list; other values pass through."""
    if isinstance(value, str):
        parts = value.replace(",", " ").split()
        if not parts:
            raise ValueError("empty list")
        return parts
    return value


class ExperimentManifest(BaseModel):
    """One experiment: kind, map and parameters."""
    kind: Optional[str] = None
    map: str = Field(..., min_length=1, description="builtin:<name> or a map-spec path")
    epsilon: Optional[float] = None
    seed: Optional[int] = Field(default=None, ge=0, description="Master seed")
    out: Optional[str] = None

    n: Optional[int] = Field(default=None, ge=1)
    seeds: Optional[int] = Field(default=None, ge=1)
    burn_in: Optional[int] = Field(default=None, ge=0)
    horizon: Optional[int] = Field(default=None, ge=1)
    ph_horizon: Optional[int] = Field(default=None, ge=1)
    grid: Optional[int] = Field(default=None, ge=1)
    convergence: Optional[bool] = None

    sigma: Optional[str] = None
    R: Optional[List[float]] = None
    radii: Optional[List[float]] = None
    r_min: Optional[float] = Field(default=None, gt=0)
    min_distance: Optional[float] = Field(default=None, gt=0)
    k: Optional[int] = Field(default=None, ge=1)

    tolerance: Optional[float] = Field(default=None, gt=0)
    samples: Optional[int] = Field(default=None, ge=0)
    bins: Optional[int] = Field(default=None, ge=1)
    plaques: Optional[int] = Field(default=None, ge=1)
    disk_radius: Optional[float] = Field(default=None, gt=0)
    centers: Optional[int] = Field(default=None, ge=1)
    mode: Optional[str] = None

    du: Optional[List[float]] = None
    offsets: Optional[List[float]] = None
    segment: Optional[float] = Field(default=None, gt=0)

    max_period: Optional[int] = Field(default=None, ge=1)
    threshold: Optional[float] = Field(default=None, gt=0)
    iterates: Optional[List[int]] = None

    epsilons: Optional[List[float]] = None
    flip_axis: Optional[int] = Field(default=None, ge=0, le=2)

    @validator(*LIST_FIELDS, pre=True)
    def split_lists(cls, v):
        """Accept comma- or space-separated lists."""
        return split_list(v)

    @validator("kind")
    def validate_kind(cls, v):
        """Ensure the kind is one the runner dispatches."""
        if v is not None and v not in EXPERIMENT_KINDS:
            raise ValueError(f"unknown kind {v!r}; choose from {list(EXPERIMENT_KINDS)}")
        return v

    @validator("map")
    def validate_map(cls, v):
        """Ensure the map reference is not just whitespace."""
        if not v.strip():
            raise ValueError("map cannot be empty")
        return v.strip()

    @validator("sigma")
    def validate_sigma(cls, v):
        if v is not None and v not in ("s", "c", "u"):
            raise ValueError("sigma must be one of s, c, u")
        return v

    @validator("mode")
    def validate_mode(cls, v):
        if v is not None and v not in ("analytic", "empirical"):
            raise ValueError("mode must be 'analytic' or 'empirical'")
        return v

    @validator("R", "du")
    def validate_positive(cls, v):
        """Lengths and scales must be positive."""
        if v is not None and any(x <= 0 for x in v):
            raise ValueError("values must be positive")
        return v

    @validator("epsilons")
    def validate_grid(cls, v):
        """A sweep grid must include epsilon = 0."""
        if v is not None and 0.0 not in v:
            raise ValueError("grid must include 0")
        return v

    @property
    def builtin(self) -> Optional[str]:
        """Catalog name when the map is given as builtin:<name>."""
        return self.map.split(":", 1)[1].strip() if self.map.startswith("builtin:") else None

    def parameters(self) -> Dict[str, Any]:
        """Experiment parameters (everything except kind, map, seed and out)."""
        return self.model_dump(exclude={"kind", "map", "seed", "out"}, exclude_none=True)

    class Config:
        """Pydantic configuration."""
        extra = "forbid"
        json_schema_extra = {
            "example": {
                "kind": "spectrum",
                "map": "builtin:linear_ph",
                "n": 1000,
                "seeds": 4
            }
        }


class ReportEnvelope(BaseModel):
    """Report file layout; `generated_at` is the only non-reproducible key."""
    kind: str
    map: Dict[str, Any]
    map_spec: str
    parameters: Dict[str, Any]
    seed: int
    verdict: Optional[str] = None
    result: Dict[str, Any]
    generated_at: str

    class Config:
        """Pydantic configuration."""
        json_schema_extra = {
            "example": {
                "kind": "spectrum",
                "map": {"name": "linear_ph"},
                "map_spec": "[map]\nname = linear_ph\n...",
                "parameters": {"n": 1000},
                "seed": 0,
                "verdict": None,
                "result": {"exponents": [-0.9624, 0.0, 0.9624]},
                "generated_at": "2024-01-01T00:00:00+00:00"
            }
        }


class CatalogListing(BaseModel):
    """One entry of `ph3lab list-maps`."""
    name: str
    provenance: str
    default_epsilon: float
    linear_part: List[List[int]]
    moduli: List[float]
    exponents: List[float]
    anosov: bool
