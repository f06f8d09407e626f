"""Model checkpoints as ``.npz`` archives (float64 weights + JSON metadata)."""
from __future__ import annotations

import json
from dataclasses import asdict

import numpy as np

from .net import LayerSpec, Mlp
from .system import NetParams

FORMAT_VERSION = 1


def save_checkpoint(path, params: NetParams, train_cfg=None, extra: dict | None = None) -> None:
    arrays = {}
    nets = {}
    for name, net in params.networks().items():
        nets[name] = [asdict(s) for s in net.specs]
        for i, p in enumerate(net.params):
            arrays[f"{name}/{i}"] = np.asarray(p, dtype=np.float64)
    meta = {
        "format_version": FORMAT_VERSION,
        "networks": nets,
        "power_limit": params.power_limit,
        "power_scale": params.power_scale,
        "train_config": asdict(train_cfg) if train_cfg is not None else None,
        "extra": extra or {},
    }
    arrays["meta"] = np.array(json.dumps(meta, sort_keys=True))
    with open(path, "wb") as f:
        np.savez(f, **arrays)


def load_checkpoint(path) -> tuple[NetParams, dict]:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('format_version')}")
        nets = {}
        for name, specs in meta["networks"].items():
            specs = [LayerSpec(**s) for s in specs]
            params = [data[f"{name}/{i}"] for i in range(2 * len(specs))]
            nets[name] = Mlp(specs, params=params)
    p = NetParams(
        encoder=nets["encoder"],
        legit=nets["legit"],
        eve=nets["eve"],
        power_limit=meta["power_limit"],
        power_scale=meta["power_scale"],
        eve_br=nets.get("eve_br"),
    )
    return p, meta
