"""Run configuration: flat ``key = value`` INI sections.

Sections and keys (``*`` marks required keys)::

    [data]
    train_features*   train_labels*   valid_features*   valid_labels*   vocab*
    mapping           (phone mapping applied before scoring; default identity)

    [encoder]
    hidden_dim = 128          layers = 3          subsample_factors = 2,2
    forget_bias = 1.0

    [scrf]
    max_seg_len = 8           embed_dim = 64      feature_dim = 64
    feature_layers = 1        activation = tanh

    [ctc]
    blank = 0                 (fixed; present for documentation)

    [train]
    output_dir*
    lambda = 0.5              lr_init = 0.1       lr_decay = 0.75
    dropout = 0.2             epochs = 20         pretrain_epochs = 0
    seed = 0                  batch_size = 1      clip_norm = 5.0
    target_per =              (empty: train for all epochs)

Relative paths are resolved against the config file's directory when used;
the canonical text (embedded in checkpoints) keeps them as written.  Values
given on the command line as ``section.key=value`` override the file.
Environment variables are never consulted.
"""

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .joint import ModelConfig, TrainConfig


class ConfigError(ValueError):
    pass


REQUIRED = {
    "data": ("train_features", "train_labels", "valid_features", "valid_labels", "vocab"),
    "train": ("output_dir",),
}

DEFAULTS = {
    "data": {"mapping": ""},
    "encoder": {"hidden_dim": "128", "layers": "3", "subsample_factors": "2,2", "forget_bias": "1.0"},
    "scrf": {"max_seg_len": "8", "embed_dim": "64", "feature_dim": "64", "feature_layers": "1",
             "activation": "tanh"},
    "ctc": {"blank": "0"},
    "train": {"lambda": "0.5", "lr_init": "0.1", "lr_decay": "0.75", "dropout": "0.2", "epochs": "20",
              "pretrain_epochs": "0", "seed": "0", "batch_size": "1", "clip_norm": "5.0",
              "target_per": ""},
}

@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)  # {section: {key: str}}
    base_dir: str = "."

    def get(self, section, key):
        return self.values[section][key]

    def path(self, section, key):
        """A path-valued key resolved against ``base_dir`` ("" stays "")."""
        v = self.values[section][key].strip()
        if not v or Path(v).is_absolute():
            return v
        return str(Path(self.base_dir) / v)

    @property
    def model(self):
        enc, sc = self.values["encoder"], self.values["scrf"]
        factors = tuple(int(k) for k in enc["subsample_factors"].split(",") if k.strip())
        return ModelConfig(
            hidden_dim=int(enc["hidden_dim"]), num_layers=int(enc["layers"]), subsample_factors=factors,
            embed_dim=int(sc["embed_dim"]), feature_dim=int(sc["feature_dim"]),
            feature_layers=int(sc["feature_layers"]), activation=sc["activation"],
            forget_bias=float(enc["forget_bias"]),
        )

    @property
    def train(self):
        tr = self.values["train"]
        target = tr["target_per"].strip()
        return TrainConfig(
            lam=float(tr["lambda"]), lr_init=float(tr["lr_init"]), lr_decay=float(tr["lr_decay"]),
            dropout=float(tr["dropout"]), epochs=int(tr["epochs"]), pretrain_epochs=int(tr["pretrain_epochs"]),
            seed=int(tr["seed"]), max_seg_len=int(self.values["scrf"]["max_seg_len"]),
            batch_size=int(tr["batch_size"]), clip_norm=float(tr["clip_norm"]),
            target_per=float(target) if target else None,
        )

    def to_text(self):
        """Canonical form: sections and keys in a fixed order."""
        lines = []
        for section in DEFAULTS:
            lines.append(f"[{section}]")
            for key in sorted(self.values[section]):
                lines.append(f"{key} = {self.values[section][key]}")
            lines.append("")
        return "\n".join(lines)


def parse_config(text, base_dir=".", overrides=()):
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"cannot parse config: {e}") from None
    values = {section: dict(keys) for section, keys in DEFAULTS.items()}
    for section in parser.sections():
        if section not in DEFAULTS:
            raise ConfigError(f"unknown config section [{section}]")
        for key, value in parser.items(section):
            _set(values, section, key, value)
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        lhs, value = item.split("=", 1)
        section, key = lhs.strip().split(".", 1)
        if section not in DEFAULTS:
            raise ConfigError(f"unknown config section [{section}] in override {item!r}")
        _set(values, section, key.strip(), value.strip())
    for section, keys in REQUIRED.items():
        for key in keys:
            if not values[section].get(key, "").strip():
                raise ConfigError(f"missing config key {section}.{key}")
    cfg = RunConfig(values, str(base_dir))
    try:
        cfg.model
        cfg.train
    except ValueError as e:
        raise ConfigError(f"invalid config value: {e}") from None
    return cfg


def _set(values, section, key, value):
    known = set(DEFAULTS[section]) | set(REQUIRED.get(section, ()))
    if key not in known:
        raise ConfigError(f"unknown config key {section}.{key}")
    values[section][key] = value.strip()


def load_config(path, overrides=()):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
    return parse_config(text, base_dir=path.parent, overrides=overrides)


def config_template(**data_paths):
    """A complete config with every default spelled out."""
    cfg = {s: dict(v) for s, v in DEFAULTS.items()}
    for key in REQUIRED["data"]:
        cfg["data"][key] = data_paths.get(key, "")
    cfg["data"]["mapping"] = data_paths.get("mapping", "")
    cfg["train"]["output_dir"] = data_paths.get("output_dir", "run")
    return RunConfig(cfg).to_text()
