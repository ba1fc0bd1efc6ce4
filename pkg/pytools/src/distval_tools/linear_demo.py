"""Serve a linear-softmax classifier over the bridge protocol.

Usage: python -m distval_tools.linear_demo PARAMS.json

PARAMS.json holds {"weights": [[...]], "bias": [...], "input": [...],
"baseline": [...], "groups": [[...], ...]?}.
"""
import json
import sys

import numpy as np

from .bridge import BridgeModel, serve_bridge


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1:
        print("usage: python -m distval_tools.linear_demo PARAMS.json", file=sys.stderr)
        return 2
    with open(argv[0], "r", encoding="utf-8") as fh:
        params = json.load(fh)
    w = np.asarray(params["weights"], dtype=float)
    b = np.asarray(params["bias"], dtype=float)
    model = BridgeModel(
        predict=lambda m: m @ w + b,
        x=params["input"],
        baseline=params.get("baseline", [0.0] * len(params["input"])),
        groups=params.get("groups"),
        family="categorical",
    )
    return serve_bridge(model)


if __name__ == "__main__":
    sys.exit(main())
