"""
Experiment configuration: one JSON file per experiment, with host-level
defaults (output directory, worker count) from the environment or .env.
"""
import json
import os
from dataclasses import asdict, dataclass, field, fields, replace

from dotenv import load_dotenv

from errors import ConfigError
from model_io import load_model
from model_zoo import build_model

load_dotenv()

SAMPLER_KINDS = ("sardonics", "sardonics-adaptive", "sardonics-basic", "gibbs", "block-gibbs",
                 "swendsen-wang", "metropolis")

DEFAULT_ADAPTATION = {"iterations": 20, "chain_steps": 1000, "n_init": 5, "max_lag": 100,
                      "acq_budget": 300, "n_candidates": 20}


def _env_int(name, default):
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError as e:
        raise ConfigError(f"environment variable {name}={raw!r} is not an integer") from e


@dataclass
class ExperimentConfig:
    model: dict
    samplers: list
    steps: int = 100000
    stride: int = 1
    seeds: list = field(default_factory=lambda: [0])
    out_dir: str = field(default_factory=lambda: os.getenv("SARDONICS_OUT_DIR", "runs"))
    max_lag: int = 100
    burn_in: float = 0.2
    workers: int = field(default_factory=lambda: _env_int("SARDONICS_WORKERS", 1))
    store: str = "auto"
    name: str = "experiment"

    def __post_init__(self):
        if not isinstance(self.model, dict) or not self.model:
            raise ConfigError("'model' must be a mapping (generator spec, preset or {\"file\": path})")
        if not self.samplers:
            raise ConfigError("at least one sampler is required")
        self.samplers = [self._check_sampler(s) for s in self.samplers]
        if self.steps < 1:
            raise ConfigError(f"steps must be >= 1, got {self.steps}")
        if self.stride < 1:
            raise ConfigError(f"stride must be >= 1, got {self.stride}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.max_lag < 1:
            raise ConfigError(f"max_lag must be >= 1, got {self.max_lag}")
        if not 0.0 <= self.burn_in < 1.0:
            raise ConfigError(f"burn_in must be in [0, 1), got {self.burn_in}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.store not in ("auto", "tree", "flat"):
            raise ConfigError(f"store must be auto, tree or flat, got {self.store!r}")

    @staticmethod
    def _check_sampler(spec):
        if isinstance(spec, str):
            spec = {"kind": spec}
        spec = dict(spec)
        kind = spec.get("kind")
        if kind not in SAMPLER_KINDS:
            raise ConfigError(f"unknown sampler kind {kind!r} (known: {', '.join(SAMPLER_KINDS)})")
        if kind == "sardonics" and "params" not in spec and "policy_file" not in spec:
            raise ConfigError("a 'sardonics' sampler needs 'params' or 'policy_file'")
        if kind == "sardonics-adaptive":
            if "space" not in spec:
                raise ConfigError("a 'sardonics-adaptive' sampler needs a 'space' section")
            spec["adaptation"] = {**DEFAULT_ADAPTATION, **spec.get("adaptation", {})}
        if kind == "sardonics-basic":
            spec.setdefault("lengths", [1, 2])
            spec.setdefault("gamma", 1.0)
        spec.setdefault("label", kind)
        return spec

    @property
    def labels(self):
        return [s["label"] for s in self.samplers]

    def build_model(self):
        try:
            if "file" in self.model:
                return load_model(self.model["file"])
            return build_model(self.model)
        except OSError as e:
            raise ConfigError(f"cannot read model file: {e}") from e

    def check_model(self, model):
        for spec in self.samplers:
            if spec["kind"] == "block-gibbs" and model.bipartition is None:
                raise ConfigError(f"sampler '{spec['label']}' (block-gibbs) needs a bipartite model")

    def with_overrides(self, **overrides):
        """Returns a copy with every non-None override applied (CLI flags)."""
        known = {f.name for f in fields(self)}
        changes = {k: v for k, v in overrides.items() if v is not None}
        unknown = set(changes) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
        return replace(self, **changes)

    def to_mapping(self):
        return asdict(self)

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_mapping(), f, indent=2, sort_keys=True)

    @classmethod
    def from_mapping(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
        if "model" not in data or "samplers" not in data:
            raise ConfigError("configuration needs 'model' and 'samplers'")
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigError(f"bad configuration: {e}") from e

    @classmethod
    def from_file(cls, path):
        try:
            with open(path) as f:
                data = json.load(f)
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path} is not valid JSON: {e}") from e
        return cls.from_mapping(data)
