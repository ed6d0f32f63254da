"""Experiment configuration: JSON parsing with typo-safe validation,
serialization, and the named ablation presets.

Unknown keys are rejected (naming the JSON path) rather than ignored so a
misspelled ablation knob cannot silently run the wrong cell.
"""

from __future__ import annotations

import copy
import dataclasses
import json
from dataclasses import dataclass, field

from .data import SyntheticDatasetSpec
from .loss import LossSpec
from .manifolds import CDC, INN, KINDS, REVERSE, TAYLOR, RandomNetConfig
from .model import ModelConfig
from .rng import InitScheme, ReinitPolicy
from .train import OptimizerConfig


class ConfigError(ValueError):
    """Invalid experiment config; the message names the JSON path."""


@dataclass
class ExperimentConfig:
    dataset: SyntheticDatasetSpec = field(default_factory=SyntheticDatasetSpec)
    model: ModelConfig = field(default_factory=ModelConfig)
    loss: LossSpec = field(default_factory=LossSpec)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    seeds: list = field(default_factory=lambda: [0])
    output_dir: str = "out"

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("seeds: must be non-empty")


_NET_FIELDS = {
    "kind": str,
    "depth": int,
    "channels": int,
    "kernel": int,
    "theta": float,
    "order_n": int,
    "iterations_k": int,
    "sigmas": list,
    "init": str,
    "reinit": str,
    "seed": int,
}


def _check_keys(obj, allowed, path):
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected an object")
    for key in obj:
        if key not in allowed:
            raise ConfigError(
                f"{path}.{key}: unknown key (allowed: {', '.join(sorted(allowed))})"
            )


def _build(cls, obj, path, renames=None):
    renames = renames or {}
    kwargs = {renames.get(k, k): v for k, v in obj.items()}
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_net(obj, path):
    _check_keys(obj, _NET_FIELDS, path)
    obj = dict(obj)
    if "sigmas" in obj:
        obj["sigmas"] = tuple(obj["sigmas"])
    if "kind" in obj and obj["kind"] not in KINDS:
        raise ConfigError(f"{path}.kind: unknown kind {obj['kind']!r}")
    for key, enum_cls in (("init", InitScheme), ("reinit", ReinitPolicy)):
        if key in obj:
            try:
                obj[key] = enum_cls(obj[key])
            except ValueError as exc:
                raise ConfigError(f"{path}.{key}: {exc}") from exc
    return _build(RandomNetConfig, obj, path)


def parse_config(doc) -> ExperimentConfig:
    """Parse a JSON document (text or dict) into a validated config."""
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON: {exc}") from exc
    _check_keys(doc, {"dataset", "model", "loss", "optimizer", "seeds", "output_dir"},
                "<root>")
    ds = doc.get("dataset", {})
    _check_keys(ds, {"count", "size", "noise_sigma", "seed", "val_count"}, "dataset")
    dataset = _build(SyntheticDatasetSpec, ds, "dataset")

    md = doc.get("model", {})
    _check_keys(md, {"depth", "channels", "kernel"}, "model")
    model = _build(ModelConfig, md, "model")

    ls = dict(doc.get("loss", {}))
    _check_keys(ls, {"base_norm", "lambda", "nets", "reinit_per_batch"}, "loss")
    nets = [
        _parse_net(n, f"loss.nets[{i}]") for i, n in enumerate(ls.pop("nets", []))
    ]
    loss = _build(LossSpec, {**ls, "nets": nets}, "loss", renames={"lambda": "lam"})

    oc = doc.get("optimizer", {})
    _check_keys(oc, {"lr", "epochs", "batch"}, "optimizer")
    optimizer = _build(OptimizerConfig, oc, "optimizer")

    seeds = doc.get("seeds", [0])
    if not isinstance(seeds, list) or not all(isinstance(s, int) for s in seeds):
        raise ConfigError("seeds: expected a list of integers")
    return _build(
        ExperimentConfig,
        {"dataset": dataset, "model": model, "loss": loss, "optimizer": optimizer,
         "seeds": seeds, "output_dir": doc.get("output_dir", "out")},
        "<root>",
    )


def serialize_config(cfg: ExperimentConfig) -> dict:
    """Inverse of parse_config: a JSON-ready dict that reparses equal."""
    return {
        "dataset": {
            "count": cfg.dataset.count,
            "size": cfg.dataset.size,
            "noise_sigma": cfg.dataset.noise_sigma,
            "seed": cfg.dataset.seed,
            "val_count": cfg.dataset.val_count,
        },
        "model": {
            "depth": cfg.model.depth,
            "channels": cfg.model.channels,
            "kernel": cfg.model.kernel,
        },
        "loss": {
            "base_norm": cfg.loss.base_norm,
            "lambda": cfg.loss.lam,
            "reinit_per_batch": cfg.loss.reinit_per_batch,
            "nets": [
                {
                    "kind": n.kind,
                    "depth": n.depth,
                    "channels": n.channels,
                    "kernel": n.kernel,
                    "theta": n.theta,
                    "order_n": n.order_n,
                    "iterations_k": n.iterations_k,
                    "sigmas": list(n.sigmas),
                    "init": n.init.value,
                    "reinit": n.reinit.value,
                    "seed": n.seed,
                }
                for n in cfg.loss.nets
            ],
        },
        "optimizer": {
            "lr": cfg.optimizer.lr,
            "epochs": cfg.optimizer.epochs,
            "batch": cfg.optimizer.batch,
        },
        "seeds": list(cfg.seeds),
        "output_dir": cfg.output_dir,
    }


# ---------------------------------------------------------------------------
# ablation presets
# ---------------------------------------------------------------------------


def _default_net(kind):
    return RandomNetConfig(kind=kind)


def _set_nets(cfg, nets):
    cfg.loss.nets = nets
    return cfg


def _each_net(cfg, fn):
    for n in cfg.loss.nets:
        fn(n)
    return cfg


def _number_preset(cfg, kernels):
    if not cfg.loss.nets:
        raise ConfigError("number presets need a manifold preset first (e.g. cdc+number357)")
    base = cfg.loss.nets[0]
    cfg.loss.nets = [dataclasses.replace(base, kernel=k) for k in kernels]
    return cfg


PRESETS = {
    "original": lambda cfg: _set_nets(cfg, []),
    "taylor": lambda cfg: _set_nets(cfg, [_default_net(TAYLOR)]),
    "cdc": lambda cfg: _set_nets(cfg, [_default_net(CDC)]),
    "inn": lambda cfg: _set_nets(cfg, [_default_net(INN)]),
    "reverse": lambda cfg: _set_nets(cfg, [_default_net(REVERSE)]),
    "epochR": lambda cfg: _each_net(
        cfg, lambda n: setattr(n, "reinit", ReinitPolicy.EACH_EPOCH)),
    "once": lambda cfg: _each_net(
        cfg, lambda n: setattr(n, "reinit", ReinitPolicy.ONCE)),
    "xavier": lambda cfg: _each_net(
        cfg, lambda n: setattr(n, "init", InitScheme.XAVIER)),
    "kaiming": lambda cfg: _each_net(
        cfg, lambda n: setattr(n, "init", InitScheme.KAIMING)),
    "depth3": lambda cfg: _each_net(cfg, lambda n: setattr(n, "depth", 3)),
    "depth7": lambda cfg: _each_net(cfg, lambda n: setattr(n, "depth", 7)),
    "number357": lambda cfg: _number_preset(cfg, (3, 5, 7)),
    "number555": lambda cfg: _number_preset(cfg, (5, 5, 5)),
}


def apply_preset(cfg: ExperimentConfig, name: str) -> ExperimentConfig:
    """Apply one preset fragment in place; raises on unknown names."""
    if name not in PRESETS:
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}"
        )
    return PRESETS[name](cfg)


def apply_cell(cfg: ExperimentConfig, label: str) -> ExperimentConfig:
    """Apply a '+'-joined preset chain (e.g. 'cdc+epochR') to a deep copy."""
    out = copy.deepcopy(cfg)
    for name in label.split("+"):
        apply_preset(out, name.strip())
    return out
