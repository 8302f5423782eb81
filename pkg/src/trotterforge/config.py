"""Dataclass configs and the desk/paper profiles.

The paper profile matches the published hyperparameter table; the desk
profile shrinks widths, diffusion steps, and batch size so the full pipeline
runs on a laptop CPU in minutes.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass


@dataclass(frozen=True)
class Profile:
    name: str
    gnn_hidden: int
    gnn_out: int
    gnn_layers: int
    gnn_dropout: float
    pinn_fourier: int
    pinn_width: int
    diff_width: int
    diff_group_layers: int
    diff_order_layers: int
    diff_tau_layers: int
    diff_heads: int
    diff_steps: int
    batch: int


PAPER = Profile(
    name="paper",
    gnn_hidden=256,
    gnn_out=512,
    gnn_layers=4,
    gnn_dropout=0.1,
    pinn_fourier=256,
    pinn_width=512,
    diff_width=256,
    diff_group_layers=4,
    diff_order_layers=2,
    diff_tau_layers=3,
    diff_heads=4,
    diff_steps=1000,
    batch=32,
)

DESK = Profile(
    name="desk",
    gnn_hidden=64,
    gnn_out=64,
    gnn_layers=4,
    gnn_dropout=0.1,
    pinn_fourier=64,
    pinn_width=64,
    diff_width=64,
    diff_group_layers=2,
    diff_order_layers=2,
    diff_tau_layers=3,
    diff_heads=4,
    diff_steps=100,
    batch=8,
)

PROFILES = {"desk": DESK, "paper": PAPER}


def get_profile(name: str) -> Profile:
    try:
        return PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown profile {name!r}; pick from {sorted(PROFILES)}")


def config_hash(config) -> str:
    """Stable short hash of any dataclass / dict tree (for run provenance)."""

    def plain(obj):
        if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
            return {f.name: plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
        if isinstance(obj, dict):
            return {str(k): plain(v) for k, v in sorted(obj.items())}
        if isinstance(obj, (list, tuple)):
            return [plain(v) for v in obj]
        return obj

    blob = json.dumps(plain(config), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
