"""MetaR few-shot knowledge graph link prediction (C++ core).

Every command takes a mapping of config keys to values; values are converted
with str(), so paths and numbers can be passed directly.
"""

import json

from . import _metar
from ._metar import MetarError, config_keys, load_checkpoint_embeddings, rank_query, score


def _strings(config):
    return {str(k): str(v) for k, v in config.items()}


def resolve_config(config):
    """Resolved `key = value` configuration text."""
    return _metar.resolve_config(_strings(config))


def synth(config):
    """Write a synthetic benchmark to out_dir; returns its statistics."""
    return _metar.synth(_strings(config))


def pretrain(config):
    """Pretrain TransE (background_mode = pre_train); returns (entities, relations)."""
    return _metar.pretrain(_strings(config))


def train(config):
    """Train MetaR, writing the best-dev checkpoint and log."""
    return _metar.train(_strings(config))


def evaluate(config):
    """Evaluate a checkpoint; returns the report as a dict."""
    return json.loads(_metar.evaluate(_strings(config)))


def ablate(config):
    """Train standard and -g models, fit the -g-r baseline; returns three reports."""
    return json.loads(_metar.ablate(_strings(config)))


def stats(config):
    """Dataset statistics for data_dir."""
    return _metar.stats(_strings(config))


__all__ = [
    "MetarError",
    "ablate",
    "config_keys",
    "evaluate",
    "load_checkpoint_embeddings",
    "pretrain",
    "rank_query",
    "resolve_config",
    "score",
    "stats",
    "synth",
    "train",
]
