"""Parameter checkpoints as versioned JSON.

A checkpoint holds ordered (name, shape, flat fp64 data) records for the
online and target parameter stores, the network geometry needed to
rebuild them, and optional training state (optimizer moments, epoch,
generator states) for exact-state resume. JSON round-trips IEEE-754
doubles exactly, so save/load is lossless.
"""

import json

import numpy as np

from .autodiff import ShapeError
from .networks import PolicyNets

CHECKPOINT_FORMAT_VERSION = 1


def _store_records(store):
    return [
        {"name": name, "shape": list(t.data.shape), "data": t.data.ravel().tolist()}
        for name, t in store.items()
    ]


def _as_tuples(records):
    return [(r["name"], tuple(r["shape"]), r["data"]) for r in records]


def save_checkpoint(path, nets, mode, training_state=None):
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "mode": mode,
        "network": {
            "d_static": nets.d_static,
            "d_dynamic": nets.d_dynamic,
            "num_options": nets.K,
            "hidden_dim": nets.hidden_dim,
            "head_hidden": nets.head_hidden,
            "static_proj": nets.static_proj,
        },
        "params": _store_records(nets.parameters()),
        "target_params": _store_records(nets.target_parameters()),
    }
    if training_state is not None:
        payload["training_state"] = training_state
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_checkpoint(path):
    """Rebuild networks from a checkpoint; returns (nets, mode, training_state)."""
    with open(path) as fh:
        payload = json.load(fh)
    version = payload.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ShapeError(f"{path}: unsupported checkpoint format version {version!r}")
    geo = payload["network"]
    nets = PolicyNets(
        d_static=geo["d_static"],
        d_dynamic=geo["d_dynamic"],
        num_options=geo["num_options"],
        hidden_dim=geo["hidden_dim"],
        head_hidden=geo["head_hidden"],
        static_proj=geo["static_proj"],
        rng=np.random.default_rng(0),
    )
    nets.parameters().load_arrays(_as_tuples(payload["params"]))
    nets.target_parameters().load_arrays(_as_tuples(payload["target_params"]))
    return nets, payload["mode"], payload.get("training_state")
