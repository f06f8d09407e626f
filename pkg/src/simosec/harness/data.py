"""Message datasets: uniform 16-QAM symbol indices split train/test."""
from __future__ import annotations

import numpy as np

from .config import ExperimentConfig


def generate_dataset(cfg: ExperimentConfig, rng: np.random.Generator | None = None, n_messages: int = 16):
    """Draw ``n_train + n_test`` uniform messages and split them in order."""
    if rng is None:
        rng = np.random.default_rng([cfg.master_seed, 0xDA7A])
    msgs = rng.integers(0, n_messages, cfg.n_train + cfg.n_test)
    return msgs[: cfg.n_train], msgs[cfg.n_train:]


def save_dataset(path, train, test, seed: int) -> None:
    with open(path, "w", newline="") as f:
        f.write(f"# master_seed={seed}\n")
        f.write("split,index,message\n")
        for split, msgs in (("train", train), ("test", test)):
            for i, m in enumerate(msgs):
                f.write(f"{split},{i},{int(m)}\n")


def load_dataset(path):
    train, test = [], []
    with open(path) as f:
        for line in f:
            if line.startswith("#") or line.startswith("split"):
                continue
            split, _, m = line.strip().split(",")
            (train if split == "train" else test).append(int(m))
    return np.array(train, dtype=np.int64), np.array(test, dtype=np.int64)
