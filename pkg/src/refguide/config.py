"""Run configuration: presets, JSON config files, and flag overrides.

One flat key set covers every subcommand; a JSON config file supplies any
subset, command-line flags override it, and unknown keys are rejected by
name. Presets bind the reference strength to the recommended operating
points; anything else goes through preset "custom".
"""

import json
from dataclasses import dataclass, fields
from pathlib import Path

from .kernels import POLICY_KINDS, AttentionPolicy
from .oracle import DEFAULT_GRID
from .pipeline import PRECISION_DTYPES, PipelineConfig

# Recommended operating points. "consistent" strengthens subject consistency
# (working range 0.3..0.4, midpoint used); "diverse" pushes away from the
# reference; "temporal" is the video/temporal-smoothing setting; "blend"
# mixes several references at equal strength (per-reference range 0.2..0.4).
CONSISTENT_STRENGTH = 0.35
CONSISTENT_RANGE = (0.3, 0.4)
DIVERSE_STRENGTH = -0.3
TEMPORAL_STRENGTH = 0.2
BLEND_STRENGTH = 0.3
BLEND_RANGE = (0.2, 0.4)

PRESET_STRENGTHS = {
    "consistent": CONSISTENT_STRENGTH,
    "diverse": DIVERSE_STRENGTH,
    "temporal": TEMPORAL_STRENGTH,
}
PRESETS = ("consistent", "diverse", "temporal", "blend", "custom")

# Keys that contradict a non-custom preset (the preset fixes the policy).
_POLICY_KEYS = ("policy_kind", "strength", "strengths")


class ConfigError(ValueError):
    """Bad configuration: unknown key, bad value, or violated invariant."""


@dataclass(frozen=True)
class RunConfig:
    """Everything a subcommand needs, resolved from defaults, file, and flags."""

    preset: str = "custom"
    policy_kind: str = "rfg"
    strength: float = CONSISTENT_STRENGTH
    strengths: tuple | None = None
    references: int = 2
    side: int = 16
    blocks: int = 4
    d_model: int = 32
    d: int = 32
    d_v: int = 32
    steps: int = 20
    batch: int = 4
    layer_strengths: tuple | None = None
    duplicate_noise: bool = False
    weights_seed: int = 42
    noise_seed: int = 7
    seed: int | None = None
    precision: str = "f32"
    out_dir: str = "out"
    trials: int = 20
    grid: tuple | None = None
    threshold: float | None = None
    stress_scale: float = 100.0
    stress_trials: int = 5
    corrupt_kernel: float = 0.0
    sweep_strengths: tuple = (-0.3, 0.2, 0.35)
    bench_grid: tuple = ((64, 64, 64, 8), (256, 64, 64, 8))
    iterations: int = 100
    warmup: int = 10

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}, expected one of {PRESETS}")
        if self.policy_kind not in POLICY_KINDS:
            raise ConfigError(f"unknown policy_kind {self.policy_kind!r}, expected one of {POLICY_KINDS}")
        if self.precision not in PRECISION_DTYPES:
            raise ConfigError(f"precision must be 'f32' or 'f64', got {self.precision!r}")
        if self.references < 1:
            raise ConfigError(f"references must be at least 1, got {self.references}")
        if self.trials < 1:
            raise ConfigError(f"trials must be at least 1, got {self.trials}")
        if self.stress_trials < 0:
            raise ConfigError(f"stress_trials must be nonnegative, got {self.stress_trials}")
        if self.iterations < 1:
            raise ConfigError(f"iterations must be at least 1, got {self.iterations}")
        if self.warmup < 0:
            raise ConfigError(f"warmup must be nonnegative, got {self.warmup}")
        if not self.sweep_strengths:
            raise ConfigError("sweep_strengths must name at least one coefficient")
        if not self.bench_grid:
            raise ConfigError("bench_grid must name at least one (L, d, d_v, B) cell")

    def resolved_policy(self) -> AttentionPolicy:
        """The attention policy this config's preset (or custom fields) names."""
        if self.preset in PRESET_STRENGTHS:
            return AttentionPolicy.rfg(PRESET_STRENGTHS[self.preset])
        if self.preset == "blend":
            return AttentionPolicy.rfg_multi((BLEND_STRENGTH,) * self.references)
        kind = self.policy_kind
        if kind == "rfg":
            return AttentionPolicy.rfg(self.strength)
        if kind == "rfg-multi":
            if not self.strengths:
                raise ConfigError("policy_kind 'rfg-multi' requires a nonempty strengths list")
            return AttentionPolicy.rfg_multi(self.strengths)
        return AttentionPolicy(kind)

    def resolved_seeds(self) -> tuple:
        """(weights_seed, noise_seed); a top-level seed overrides both."""
        if self.seed is not None:
            return int(self.seed), int(self.seed) + 1
        return self.weights_seed, self.noise_seed

    @property
    def check_seed(self) -> int:
        return self.seed if self.seed is not None else 0

    @property
    def check_grid(self) -> tuple:
        return self.grid if self.grid is not None else DEFAULT_GRID

    def pipeline_config(self, strength_override: float | None = None) -> PipelineConfig:
        """PipelineConfig for this run; ``strength_override`` swaps in one rfg strength."""
        policy = self.resolved_policy()
        if strength_override is not None:
            policy = AttentionPolicy.rfg(float(strength_override))
        weights_seed, noise_seed = self.resolved_seeds()
        try:
            return PipelineConfig(
                side=self.side,
                blocks=self.blocks,
                d_model=self.d_model,
                d=self.d,
                d_v=self.d_v,
                steps=self.steps,
                batch=self.batch,
                policy=policy,
                layer_strengths=self.layer_strengths,
                duplicate_noise=self.duplicate_noise,
                weights_seed=weights_seed,
                noise_seed=noise_seed,
                precision=self.precision,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        """JSON-ready resolved view, written next to outputs for provenance.

        ``out_dir`` is omitted: it says where the artifacts live, not what
        they contain, and keeping it out makes reruns into different
        directories produce byte-identical dumps.
        """
        out = {}
        for f in fields(self):
            if f.name == "out_dir":
                continue
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = [list(v) if isinstance(v, tuple) else v for v in value]
            out[f.name] = value
        policy = self.resolved_policy()
        out["resolved_policy"] = {
            "kind": policy.kind,
            "strength": policy.strength,
            "strengths": list(policy.strengths),
        }
        out["resolved_weights_seed"], out["resolved_noise_seed"] = self.resolved_seeds()
        return out


_FIELD_NAMES = tuple(f.name for f in fields(RunConfig))
_INT_KEYS = {
    "references", "side", "blocks", "d_model", "d", "d_v", "steps", "batch",
    "weights_seed", "noise_seed", "seed", "trials", "stress_trials",
    "iterations", "warmup",
}
_FLOAT_KEYS = {"strength", "threshold", "stress_scale", "corrupt_kernel"}
_STR_KEYS = {"preset", "policy_kind", "precision", "out_dir"}
_BOOL_KEYS = {"duplicate_noise"}
_FLOAT_SEQ_KEYS = {"strengths", "layer_strengths", "sweep_strengths"}
_GRID_KEYS = {"grid": 3, "bench_grid": 4}


def _coerce(key: str, value):
    if value is None and key in ("seed", "threshold", "strengths", "layer_strengths", "grid"):
        return None
    if key in _INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"key {key!r} must be an integer, got {value!r}")
        return value
    if key in _FLOAT_KEYS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"key {key!r} must be a number, got {value!r}")
        return float(value)
    if key in _STR_KEYS:
        if not isinstance(value, str):
            raise ConfigError(f"key {key!r} must be a string, got {value!r}")
        return value
    if key in _BOOL_KEYS:
        if not isinstance(value, bool):
            raise ConfigError(f"key {key!r} must be true or false, got {value!r}")
        return value
    if key in _FLOAT_SEQ_KEYS:
        if not isinstance(value, (list, tuple)) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        ):
            raise ConfigError(f"key {key!r} must be a list of numbers, got {value!r}")
        return tuple(float(v) for v in value)
    if key in _GRID_KEYS:
        width = _GRID_KEYS[key]
        ok = isinstance(value, (list, tuple)) and all(
            isinstance(cell, (list, tuple))
            and len(cell) == width
            and all(isinstance(v, int) and not isinstance(v, bool) and v > 0 for v in cell)
            for cell in value
        )
        if not ok:
            raise ConfigError(f"key {key!r} must be a list of {width}-integer cells, got {value!r}")
        return tuple(tuple(cell) for cell in value)
    raise ConfigError(f"unknown config key {key!r}")


def parse_config(path=None, overrides=None) -> RunConfig:
    """Build a RunConfig from an optional JSON file plus flag overrides.

    Flags win over the file; both win over defaults. Every violation raises
    ConfigError with a message naming the offending key or file.
    """
    data = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config root must be a JSON object, got {type(raw).__name__}")
        data.update(raw)
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})

    unknown = sorted(set(data) - set(_FIELD_NAMES))
    if unknown:
        raise ConfigError(f"unknown config key {unknown[0]!r}" + (f" (and {len(unknown) - 1} more)" if len(unknown) > 1 else ""))

    preset = data.get("preset", "custom")
    if preset in PRESETS and preset != "custom":
        clashing = [k for k in _POLICY_KEYS if k in data]
        if clashing:
            raise ConfigError(
                f"preset {preset!r} fixes the policy; key {clashing[0]!r} is only valid with preset 'custom'"
            )

    kwargs = {k: _coerce(k, v) for k, v in data.items()}
    cfg = RunConfig(**kwargs)
    cfg.pipeline_config()
    return cfg
