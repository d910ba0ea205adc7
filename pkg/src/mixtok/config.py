"""Run configuration and the named profiles (desk-scale and large-scale)."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .errors import ValidationError
from .mixture import DirichletConfig
from .regressor import BoostingConfig

KB = 1_000
MB = 1_000_000
GB = 1_000_000_000


@dataclass(frozen=True)
class Scale:
    bytes: int
    vocab_size: int

    def __post_init__(self):
        if self.bytes < 1 or self.vocab_size < 257:
            raise ValidationError(f"invalid scale {self.bytes} bytes / V={self.vocab_size}")

    def label(self) -> str:
        return f"{self.bytes}B-V{self.vocab_size}"

    @classmethod
    def parse(cls, text: str) -> "Scale":
        """'512000:1024' -> Scale(512000, 1024)."""
        try:
            b, v = text.split(":")
            return cls(int(b), int(v))
        except ValueError:
            raise ValidationError(f"scale must look like BYTES:VOCAB, got {text!r}") from None


@dataclass(frozen=True)
class PipelineConfig:
    corpus: str = ""
    languages: tuple[str, ...] = ()
    proxy: Scale = Scale(512 * KB, 1024)
    full: Scale = Scale(4 * MB, 4096)
    n_mixtures: int = 64
    n_fit: int = 48
    n_holdout: int = 16
    test_fraction: float = 0.01
    dirichlet: DirichletConfig = DirichletConfig()
    boosting: BoostingConfig = BoostingConfig()
    search_candidates: int = 1_000_000
    top_m: int = 100
    reference: str = "train-uniform"
    jobs: int = 1
    seed: int = 0
    out: str = "runs/desk"
    failure_budget: float = 0.05
    # synthetic corpus used by the desk profile
    synthetic_langs: int = 5
    synthetic_bytes_per_lang: int = 2 * MB

    def __post_init__(self):
        if self.n_fit + self.n_holdout != self.n_mixtures:
            raise ValidationError(
                f"n_fit + n_holdout ({self.n_fit} + {self.n_holdout}) must equal n_mixtures ({self.n_mixtures})")
        if min(self.n_mixtures, self.n_fit, self.n_holdout, self.search_candidates, self.top_m, self.jobs) < 1:
            raise ValidationError("counts must be positive")
        if self.proxy.bytes > self.full.bytes or self.proxy.vocab_size > self.full.vocab_size:
            raise ValidationError("proxy scale must not exceed full scale")

    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    def with_overrides(self, **kw) -> "PipelineConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict, base: "PipelineConfig | None" = None) -> "PipelineConfig":
        """Overlay `obj` on `base` (or the profile it names, or the desk profile)."""
        obj = dict(obj)
        if base is None:
            base = PROFILES[obj.pop("profile", "desk")]
        else:
            obj.pop("profile", None)
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        kw = {}
        try:
            for key, val in obj.items():
                if key in ("proxy", "full"):
                    kw[key] = Scale(**val) if isinstance(val, dict) else Scale.parse(val)
                elif key == "dirichlet":
                    kw[key] = DirichletConfig(**{**asdict(base.dirichlet), **val})
                elif key == "boosting":
                    kw[key] = BoostingConfig(**{**asdict(base.boosting), **val})
                elif key == "languages":
                    kw[key] = tuple(val)
                else:
                    kw[key] = val
        except TypeError as exc:
            raise ValidationError(f"bad config value: {exc}") from None
        return replace(base, **kw)

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        try:
            obj = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_json(obj)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")


DESK = PipelineConfig()

LARGE = PipelineConfig(
    proxy=Scale(1 * GB, 64_000),
    full=Scale(30 * GB, 200_000),
    n_mixtures=512,
    n_fit=480,
    n_holdout=32,
    test_fraction=0.001,
    search_candidates=50_000_000,
    out="runs/large",
)

PROFILES = {"desk": DESK, "large": LARGE}

# fixed inputs of the cost report
ADAPTMIX_ITERATIONS = 20
DEFAULT_HARDWARE = "32x H100 GPUs; 13B-parameter model, 3T tokens"
