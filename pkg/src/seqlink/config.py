"""Run configuration: defaults, config-file parsing, and provenance echo.

Config files are flat ``key = value`` text under section headers (INI
style). Every field starts from the package default; a config file
overrides fields it names; command-line flags override both. Each command
writes the fully resolved configuration back into its output directory so
any artifact can be reproduced from what sits next to it.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

from .ddpg import TrainConfig
from .embedding import WalkConfig
from .environment import RewardConfig
from .graphs import SyntheticSpec
from .seeding import derive_seed


class ConfigError(ValueError):
    """Unknown keys, malformed values, or out-of-range settings."""


@dataclass
class RunConfig:
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    walks: WalkConfig = field(default_factory=WalkConfig)
    rewards: RewardConfig = field(default_factory=RewardConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    train_ratio: float = 0.6
    k_list: tuple[int, ...] = (1, 3, 5, 9, 30)
    seed: int = 0
    out_dir: str = "out"

    # -- file names inside the output directory ------------------------------

    def path(self, name: str) -> Path:
        return Path(self.out_dir) / name

    GRAPH_ORIGINAL = "graph_original.edges"
    GRAPH_TARGET = "graph_target.edges"
    ANCHORS = "anchors.txt"
    EMB_ORIGINAL = "embeddings_original.txt"
    EMB_TARGET = "embeddings_target.txt"
    CHECKPOINT = "checkpoint.ckpt"
    TRAIN_LOG = "train_log.csv"
    EPISODE_TRACE = "episode_trace.csv"
    METRICS = "metrics.json"
    RESOLVED = "resolved_config.txt"

    # -- seed plumbing --------------------------------------------------------

    def apply_global_seed(self) -> None:
        """Derive every stage seed from the single run seed."""
        self.synthetic.seed = derive_seed(self.seed, "synthetic")
        self.walks.seed = derive_seed(self.seed, "walks")
        self.training.seed = derive_seed(self.seed, "train")

    def walk_config_for(self, side: str) -> WalkConfig:
        cfg = dataclasses.replace(self.walks)
        cfg.seed = derive_seed(self.seed, f"walks:{side}")
        return cfg


_SECTIONS = {
    "synthetic": "synthetic",
    "embedding": "walks",
    "reward": "rewards",
    "training": "training",
}


def _coerce(raw: str, like) -> object:
    if isinstance(like, bool):
        lowered = raw.strip().lower()
        if lowered in ("true", "1", "yes"):
            return True
        if lowered in ("false", "0", "no"):
            return False
        raise ConfigError(f"expected a boolean, got {raw!r}")
    if like is None or isinstance(like, int) and not isinstance(like, bool):
        return int(raw)
    if isinstance(like, float):
        return float(raw)
    return raw


def _apply_section(obj, section: configparser.SectionProxy, where: str) -> None:
    known = {f.name: f for f in fields(obj)}
    for key, raw in section.items():
        if key not in known:
            raise ConfigError(f"unknown key {key!r} in section [{where}]")
        current = getattr(obj, key)
        try:
            if key in ("max_steps", "clip_norm") and raw.strip().lower() in ("none", ""):
                setattr(obj, key, None)
            elif key == "clip_norm":
                setattr(obj, key, float(raw))
            elif key == "max_steps":
                setattr(obj, key, int(raw))
            else:
                setattr(obj, key, _coerce(raw, current))
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r} in [{where}]: {raw!r}") from exc


def load_config(path=None) -> RunConfig:
    cfg = RunConfig()
    if path is None:
        return cfg
    parser = configparser.ConfigParser()
    parser.optionxform = str
    read = parser.read(path, encoding="utf-8")
    if not read:
        raise ConfigError(f"config file not found: {path}")
    for section in parser.sections():
        if section in _SECTIONS:
            _apply_section(getattr(cfg, _SECTIONS[section]), parser[section], section)
        elif section == "run":
            for key, raw in parser["run"].items():
                if key == "train_ratio":
                    cfg.train_ratio = float(raw)
                elif key == "k_list":
                    cfg.k_list = tuple(int(tok) for tok in raw.replace(",", " ").split())
                elif key == "seed":
                    cfg.seed = int(raw)
                elif key == "out":
                    cfg.out_dir = raw
                else:
                    raise ConfigError(f"unknown key {key!r} in section [run]")
        else:
            raise ConfigError(f"unknown section [{section}]")
    return cfg


def resolved_text(cfg: RunConfig) -> str:
    """Render the full configuration as sectioned key = value text."""
    lines: list[str] = []
    for section, attr in _SECTIONS.items():
        obj = getattr(cfg, attr)
        lines.append(f"[{section}]")
        for f in fields(obj):
            lines.append(f"{f.name} = {getattr(obj, f.name)}")
        lines.append("")
    lines.append("[run]")
    lines.append(f"train_ratio = {cfg.train_ratio}")
    lines.append(f"k_list = {','.join(str(k) for k in cfg.k_list)}")
    lines.append(f"seed = {cfg.seed}")
    lines.append(f"out = {cfg.out_dir}")
    lines.append("")
    return "\n".join(lines)


def echo_resolved(cfg: RunConfig) -> None:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg.path(RunConfig.RESOLVED).write_text(resolved_text(cfg), encoding="utf-8")
