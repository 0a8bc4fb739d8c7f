"""Python bindings for the dnnshield C++ core."""

import json as _json

from ._core import (  # noqa: F401
    Error,
    Model,
    ThresholdTable,
    __version__,
    certified_radius,
    cpdn,
    forward,
    load_dataset,
    load_model,
    load_threshold_table,
    profile_thresholds,
    synthetic_dataset,
    train_fixture,
    z_gap,
)
from . import _core


def _text(cfg):
    if cfg is None:
        return ""
    return cfg if isinstance(cfg, str) else _json.dumps(cfg)


def sr_cap(z, params=None):
    return _core.sr_cap(z, _text(params))


def detect(model, x, table, config, input_id=0):
    """Runs the multi-pass detector on one input. config uses the tool's JSON keys."""
    return _core.detect(model, x, table, _text(config), input_id)


def cw_l2(model, x, target, **kw):
    return _core.cw_l2(model, x, target, **kw)


def simulate_group(masks, config=None):
    return _core.simulate_group(masks, _text(config))
