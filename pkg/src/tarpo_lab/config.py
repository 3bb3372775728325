"""Run configuration: an INI file with [reward], [run], [sim] and [shape] sections.

Every key is optional; unknown sections or keys are rejected. ``lambda`` in
[reward] maps to ``RewardConfig.lam``.
"""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError
from .reward import RewardConfig
from .sim.policy import SimConfig
from .sim.tasks import ShapeConfig
from .sim.training import TrainConfig

_TRAIN_KEYS = tuple(
    f.name for f in fields(TrainConfig) if f.name not in ("reward", "sim", "shape", "seed")
)


@dataclass(frozen=True)
class RunConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    out: str = "runs"

    def for_seed(self, seed: int) -> TrainConfig:
        return replace(self.train, seed=seed)

    def to_dict(self) -> dict:
        t = self.train
        run = {k: getattr(t, k) for k in _TRAIN_KEYS}
        run["seeds"] = list(self.seeds)
        run["out"] = self.out
        reward = asdict(t.reward)
        reward["lambda"] = reward.pop("lam")
        shape = asdict(t.shape)
        shape["kinds"] = list(shape["kinds"])
        return {"reward": reward, "run": run, "sim": asdict(t.sim), "shape": shape}


def _convert(raw: str, default, where: str):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            lowered = raw.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(x.strip() for x in raw.split(",") if x.strip())
        return raw
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r}") from None


def _section_values(parser, section: str, defaults: dict) -> dict:
    out = {}
    if not parser.has_section(section):
        return out
    for key, raw in parser.items(section):
        if key not in defaults:
            raise ConfigError(f"unknown key [{section}] {key}")
        out[key] = _convert(raw, defaults[key], f"[{section}] {key}")
    return out


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    unknown = set(parser.sections()) - {"reward", "run", "sim", "shape"}
    if unknown:
        raise ConfigError(f"unknown sections: {sorted(unknown)}")

    base = TrainConfig()
    reward_defaults = {("lambda" if k == "lam" else k): v for k, v in asdict(base.reward).items()}
    reward_kw = _section_values(parser, "reward", reward_defaults)
    if "lambda" in reward_kw:
        reward_kw["lam"] = reward_kw.pop("lambda")
    sim_kw = _section_values(parser, "sim", asdict(base.sim))
    shape_kw = _section_values(parser, "shape", asdict(base.shape))

    run_defaults = {k: getattr(base, k) for k in _TRAIN_KEYS}
    run_defaults["seeds"] = ("0",)
    run_defaults["out"] = "runs"
    run_kw = _section_values(parser, "run", run_defaults)
    seeds = RunConfig().seeds
    if "seeds" in run_kw:
        try:
            seeds = tuple(int(s) for s in run_kw.pop("seeds"))
        except ValueError:
            raise ConfigError("[run] seeds must be a comma-separated list of integers") from None
        if not seeds:
            raise ConfigError("[run] seeds must not be empty")
    out = run_kw.pop("out", "runs")

    try:
        train = TrainConfig(
            reward=RewardConfig(**reward_kw),
            sim=SimConfig(**sim_kw),
            shape=ShapeConfig(**shape_kw),
            **run_kw,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return RunConfig(train, seeds, out)


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path))
