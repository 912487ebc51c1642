"""One JSON document configures a whole hosted competition."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .design import SplitConfig
from .domain import DEFAULT_SOURCES, FactorSpace, SourceCatalog
from .exceptions import ValidationError
from .scoring import ScoreWeights, SubmissionPolicy
from .simulate import SupersetSpec, SyntheticTruth

DEFAULT_PATHS = {
    "superset": "superset.csv",
    "host_manifest": "host_manifest.csv",
    "test_manifest": "test_manifest.csv",
    "train_manifest": "train_manifest.csv",
    "design_report": "design_report.json",
    "board": "leaderboard_state.json",
    "teams_dir": "teams",
    "mocks_dir": "mocks",
    "reports_dir": "reports",
}


@dataclass(frozen=True)
class CompetitionConfig:
    factor_space: FactorSpace
    catalog: SourceCatalog = field(default_factory=SourceCatalog)
    split: SplitConfig | None = None
    weights: ScoreWeights | None = None
    policy: SubmissionPolicy = field(default_factory=SubmissionPolicy)
    superset: SupersetSpec | None = None
    truth: SyntheticTruth | None = None
    paths: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.split is not None:
            self.split.validate(self.factor_space)
            for split, cats in self.split.targets.items():
                for cat in cats:
                    self.catalog.check(cat)
        if self.truth is not None:
            self.truth.check(self.factor_space, self.catalog)
        if self.superset is not None:
            for cat in self.superset.runs_per_category:
                self.catalog.check(cat)
        resolved = [str(Path(p)) for p in self.resolved_paths(Path(".")).values()]
        if len(set(resolved)) != len(resolved):
            raise ValidationError("configured paths must be distinct")

    def resolved_paths(self, out_dir):
        """Every artifact path; relative entries live under ``out_dir``."""
        out = {}
        for name, default in DEFAULT_PATHS.items():
            p = Path(self.paths.get(name, default))
            out[name] = p if p.is_absolute() else Path(out_dir) / p
        return out

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - {
            "factors", "sources", "split", "weights", "policy", "superset", "truth", "paths", "seed",
        }
        if unknown:
            raise ValidationError(f"unknown config key(s): {sorted(unknown)}")
        if "factors" not in data:
            raise ValidationError("config needs a 'factors' list")
        seed = int(data.get("seed", 0))
        split = None
        if "split" in data:
            split_data = dict(data["split"])
            split_data.setdefault("seed", seed)
            split = SplitConfig.from_dict(split_data)
        return cls(
            factor_space=FactorSpace.from_list(data["factors"]),
            catalog=SourceCatalog(tuple(data.get("sources", DEFAULT_SOURCES))),
            split=split,
            weights=ScoreWeights.from_dict(data["weights"]) if "weights" in data else None,
            policy=SubmissionPolicy(**data.get("policy", {})),
            superset=SupersetSpec.from_dict(data["superset"]) if "superset" in data else None,
            truth=SyntheticTruth.from_dict(data["truth"]) if "truth" in data else None,
            paths=dict(data.get("paths", {})),
            seed=seed,
        )

    @classmethod
    def load(cls, path):
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: malformed JSON ({exc})") from None
        return cls.from_dict(data)

    def with_seed(self, seed):
        data = self.to_dict()
        data["seed"] = int(seed)
        if "split" in data:
            data["split"]["seed"] = int(seed)
        return CompetitionConfig.from_dict(data)

    def to_dict(self):
        out = {
            "seed": self.seed,
            "factors": self.factor_space.to_list(),
            "sources": list(self.catalog.sources),
            "policy": {
                "max_total_submissions": self.policy.max_total_submissions,
                "max_daily_submissions": self.policy.max_daily_submissions,
            },
            "paths": dict(self.paths),
        }
        if self.split is not None:
            out["split"] = self.split.to_dict()
        if self.weights is not None:
            out["weights"] = self.weights.to_dict()
        if self.superset is not None:
            out["superset"] = self.superset.to_dict()
        if self.truth is not None:
            out["truth"] = self.truth.to_dict()
        return out
