"""Serve a user-defined predictive model as a payoff oracle over stdio.

Wire protocol (newline-delimited JSON, engine side defined by the distval
engine; this module is the child side):

  engine -> {"hello": {"n": int, "family": str, "d": int|null}}
  child  <- {"ready": true, "d": int|null}
  engine -> {"id": int, "coalition": [ascending indices]}
  child  <- {"id": int, "params": {"logits": [...]} | {"pi": x} | {"mu": m, "sigma": s}}
  child  <- {"id": int, "error": "..."}     on model exceptions

The bridge performs masking itself: it receives coalitions and substitutes
the baseline for out-of-coalition features (group-aware), keeping feature
semantics next to the model code. The model callable maps a full feature
vector to its output and must be deterministic.
"""
from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass
class BridgeModel:
    """A deterministic model plus the instance it explains.

    predict: full feature vector -> output; for categorical models an
    array-like of logits, for bernoulli a probability, for gaussian a
    (mu, sigma) pair.
    """

    predict: Callable
    x: np.ndarray
    baseline: np.ndarray
    groups: list | None = None
    family: str = "categorical"

    def __post_init__(self) -> None:
        self.x = np.asarray(self.x, dtype=float)
        self.baseline = np.asarray(self.baseline, dtype=float)
        if self.x.shape != self.baseline.shape:
            raise ValueError("input and baseline must have the same shape")
        if self.family not in ("bernoulli", "gaussian", "categorical"):
            raise ValueError(f"unknown family {self.family!r}")

    @property
    def n_players(self) -> int:
        return len(self.groups) if self.groups is not None else len(self.x)

    def masked(self, members) -> np.ndarray:
        keep = np.zeros(len(self.x), dtype=bool)
        if self.groups is None:
            keep[list(members)] = True
        else:
            for player in members:
                keep[self.groups[player]] = True
        return np.where(keep, self.x, self.baseline)

    def params_for(self, members) -> dict:
        out = self.predict(self.masked(members))
        if self.family == "categorical":
            return {"logits": [float(v) for v in np.asarray(out, dtype=float)]}
        if self.family == "bernoulli":
            return {"pi": float(out)}
        mu, sigma = out
        return {"mu": float(mu), "sigma": float(sigma)}


def serve_bridge(model: BridgeModel, stdin=None, stdout=None) -> int:
    """Answer coalition queries until EOF; returns nonzero on protocol desync."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout

    def send(obj) -> None:
        stdout.write(json.dumps(obj) + "\n")
        stdout.flush()

    line = stdin.readline()
    if not line:
        return 1
    try:
        hello = json.loads(line)["hello"]
    except (json.JSONDecodeError, KeyError, TypeError):
        return 1
    if hello.get("n") != model.n_players or hello.get("family") != model.family:
        send({"ready": False, "error": "player count or family mismatch"})
        return 1
    if model.family == "categorical":
        d = len(model.params_for(range(model.n_players))["logits"])
    else:
        d = None
    send({"ready": True, "d": d})

    for line in stdin:
        try:
            msg = json.loads(line)
            qid = msg["id"]
            members = [int(i) for i in msg["coalition"]]
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            return 1
        try:
            send({"id": qid, "params": model.params_for(members)})
        except Exception as exc:  # noqa: BLE001 - forwarded to the engine
            send({"id": qid, "error": f"{type(exc).__name__}: {exc}"})
    return 0
