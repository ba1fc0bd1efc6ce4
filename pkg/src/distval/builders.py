"""Game construction from declarative specs: tables, linear-softmax models,
the XOR example, mixtures, and the external stdio bridge.

Masking semantics: features outside the coalition take a per-feature
baseline value (default 0). Players may be groups of features, in which case
masking applies group-wise.

Bridge wire protocol (newline-delimited JSON over the child's stdin/stdout):
  handshake  -> {"hello": {"n": int, "family": str, "d": int|null}}
  ready      <- {"ready": true, "d": int|null}
  query      -> {"id": int, "coalition": [ascending indices]}
  reply      <- {"id": int, "params": {"logits": [...]} | {"pi": x} | {"mu": m, "sigma": s}}
Replies may arrive out of order; ids must match; any parse failure aborts.
"""
from __future__ import annotations

import json
import queue
import subprocess
import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BridgeStartFailure,
    BridgeTimeout,
    OracleFailure,
    ProtocolViolation,
    SpecValidation,
)
from .games import (
    BernoulliParams,
    CategoricalParams,
    Coalition,
    FAMILIES,
    GaussianParams,
    Game,
    MixtureGame,
    StochasticGame,
)

GAME_KINDS = ("table", "linear_softmax", "xor", "mixture", "bridge")


@dataclass
class GameSpec:
    """Declarative game description; payload is kind-specific."""

    kind: str
    n_players: int
    family: str
    payload: dict = field(default_factory=dict)
    d: int | None = None


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise SpecValidation(msg)


def parse_game_spec(obj: dict) -> GameSpec:
    """Validate a raw JSON object into a GameSpec."""
    _require(isinstance(obj, dict), "game spec must be a JSON object")
    kind = obj.get("kind")
    _require(kind in GAME_KINDS, f"unknown game kind {kind!r}")
    if kind == "xor":
        return GameSpec("xor", 2, "bernoulli", {})
    if kind == "table":
        family = obj.get("family")
        _require(family in FAMILIES, f"unknown family {family!r}")
        n = obj.get("n_players")
        _require(isinstance(n, int) and n >= 1, "table spec needs integer n_players >= 1")
        payoffs = obj.get("payoffs")
        _require(isinstance(payoffs, dict), "table spec needs a payoffs object")
        _require(
            len(payoffs) == 1 << n,
            f"table needs exactly 2^{n} = {1 << n} payoff entries, got {len(payoffs)}",
        )
        parsed: dict[int, object] = {}
        d = None
        for key, raw in payoffs.items():
            try:
                c = Coalition.from_key(key, n)
            except Exception as exc:
                raise SpecValidation(f"bad coalition key {key!r}: {exc}") from exc
            _require(c.key() == key.strip(), f"coalition key {key!r} is not canonical")
            params = _parse_params(family, raw)
            if family == "categorical":
                if d is None:
                    d = params.d
                _require(params.d == d, f"inconsistent d at key {key!r}")
            parsed[c.mask] = params
        return GameSpec("table", n, family, {"payoffs": parsed}, d=d)
    if kind == "linear_softmax":
        w = np.asarray(obj.get("weights"), dtype=float)
        b = np.asarray(obj.get("bias"), dtype=float)
        x = np.asarray(obj.get("input"), dtype=float)
        baseline = np.asarray(obj.get("baseline", np.zeros_like(x)), dtype=float)
        _require(w.ndim == 2, "weights must be a features x classes matrix")
        n_features, d = w.shape
        _require(d >= 2, "linear_softmax needs at least 2 classes")
        _require(b.shape == (d,), f"bias must have {d} entries")
        _require(x.shape == (n_features,), f"input must have {n_features} entries")
        _require(baseline.shape == (n_features,), f"baseline must have {n_features} entries")
        groups = obj.get("groups")
        if groups is not None:
            _require(
                isinstance(groups, list) and all(isinstance(g, list) for g in groups),
                "groups must be a list of feature-index lists",
            )
            seen: set[int] = set()
            for g in groups:
                for j in g:
                    _require(
                        isinstance(j, int) and 0 <= j < n_features,
                        f"group feature index {j} outside [0, {n_features})",
                    )
                    _require(j not in seen, f"feature {j} appears in two groups")
                    seen.add(j)
            n = len(groups)
        else:
            n = n_features
        _require(n >= 1, "need at least one player")
        payload = {"weights": w, "bias": b, "input": x, "baseline": baseline, "groups": groups}
        return GameSpec("linear_softmax", n, "categorical", payload, d=d)
    if kind == "mixture":
        pi = obj.get("pi")
        _require(isinstance(pi, (int, float)) and 0.0 <= pi <= 1.0, "mixture pi must lie in [0, 1]")
        first = parse_game_spec(obj.get("first"))
        second = parse_game_spec(obj.get("second"))
        _require(
            first.family == second.family and first.n_players == second.n_players,
            "mixture sub-specs must share family and n_players",
        )
        _require(first.d == second.d, "mixture sub-specs must share d")
        return GameSpec(
            "mixture",
            first.n_players,
            first.family,
            {"pi": float(pi), "first": first, "second": second},
            d=first.d,
        )
    # bridge
    command = obj.get("command")
    _require(
        isinstance(command, list) and command and all(isinstance(t, str) for t in command),
        "bridge spec needs a non-empty command list of strings",
    )
    family = obj.get("family")
    _require(family in FAMILIES, f"unknown family {family!r}")
    n = obj.get("n_players")
    _require(isinstance(n, int) and n >= 1, "bridge spec needs integer n_players >= 1")
    d = obj.get("d")
    if family == "categorical":
        _require(d is None or (isinstance(d, int) and d >= 2), "bridge d must be >= 2")
    else:
        _require(d is None, f"family {family!r} takes no d")
    return GameSpec("bridge", n, family, {"command": list(command)}, d=d)


def _parse_params(family: str, raw):
    from .errors import DistvalError

    _require(isinstance(raw, dict), f"payoff params must be an object, got {raw!r}")
    try:
        if family == "bernoulli":
            return BernoulliParams(float(raw["pi"]))
        if family == "gaussian":
            return GaussianParams(float(raw["mu"]), float(raw["sigma"]))
        return CategoricalParams(tuple(float(t) for t in raw["logits"]))
    except KeyError as exc:
        raise SpecValidation(f"payoff params missing field {exc}") from exc
    except (TypeError, ValueError, DistvalError) as exc:
        # Domain violations inside a spec file are spec errors, not runtime ones.
        raise SpecValidation(f"bad payoff params {raw!r}: {exc}") from exc


def xor_game() -> StochasticGame:
    """The two-player probabilistic XOR: Ber(1) on singletons, Ber(0) otherwise."""
    table = {0b00: 0.0, 0b01: 1.0, 0b10: 1.0, 0b11: 0.0}
    return StochasticGame(2, "bernoulli", lambda c: BernoulliParams(table[c.mask]))


def masked_input(x: np.ndarray, baseline: np.ndarray, coalition: Coalition, groups=None) -> np.ndarray:
    """Features inside the coalition keep x; the rest fall back to the baseline."""
    if groups is None:
        keep = np.asarray([i in coalition for i in range(len(x))])
    else:
        keep = np.zeros(len(x), dtype=bool)
        for player in coalition:
            keep[groups[player]] = True
    return np.where(keep, x, baseline)


def build_game(spec: GameSpec) -> Game:
    """Materialize a spec into a memoized stochastic game oracle."""
    if spec.kind == "xor":
        return xor_game()
    if spec.kind == "table":
        payoffs = spec.payload["payoffs"]
        return StochasticGame(
            spec.n_players, spec.family, lambda c: payoffs[c.mask], d=spec.d
        )
    if spec.kind == "linear_softmax":
        w = spec.payload["weights"]
        b = spec.payload["bias"]
        x = spec.payload["input"]
        baseline = spec.payload["baseline"]
        groups = spec.payload["groups"]

        def oracle(c: Coalition) -> CategoricalParams:
            logits = masked_input(x, baseline, c, groups) @ w + b
            return CategoricalParams(tuple(float(v) for v in logits))

        return StochasticGame(spec.n_players, "categorical", oracle, d=spec.d)
    if spec.kind == "mixture":
        return MixtureGame(
            spec.payload["pi"],
            build_game(spec.payload["first"]),
            build_game(spec.payload["second"]),
        )
    return build_bridge_game(
        spec.payload["command"], spec.n_players, spec.family, d=spec.d
    )


def export_table_spec(game: StochasticGame) -> dict:
    """Re-export any exact game as a table spec (round-trips table games identically)."""
    payoffs = {}
    for mask in range(1 << game.n_players):
        c = Coalition(mask, game.n_players)
        p = game.payoff(c)
        if game.kind == "bernoulli":
            payoffs[c.key()] = {"pi": p.pi}
        elif game.kind == "gaussian":
            payoffs[c.key()] = {"mu": p.mu, "sigma": p.sigma}
        else:
            payoffs[c.key()] = {"logits": list(p.theta)}
    return {
        "kind": "table",
        "n_players": game.n_players,
        "family": game.kind,
        "payoffs": payoffs,
    }


class BridgeClient:
    """Client side of the stdio bridge protocol; one child, serialized queries."""

    def __init__(self, command, n: int, family: str, d: int | None, timeout: float):
        self._timeout = timeout
        self._family = family
        self._lock = threading.Lock()
        self._next_id = 0
        self._pending: dict[int, dict] = {}
        self._lines: queue.Queue = queue.Queue()
        try:
            self._proc = subprocess.Popen(
                command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise BridgeStartFailure(f"cannot start bridge {command!r}: {exc}") from exc
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()
        self._send({"hello": {"n": n, "family": family, "d": d}})
        ready = self._next_message()
        if not isinstance(ready, dict) or ready.get("ready") is not True:
            self.close()
            raise BridgeStartFailure(f"bad handshake reply {ready!r}")
        reply_d = ready.get("d")
        if family == "categorical":
            if not isinstance(reply_d, int) or reply_d < 2:
                self.close()
                raise BridgeStartFailure(f"bridge declared invalid d={reply_d!r}")
            if d is not None and reply_d != d:
                self.close()
                raise BridgeStartFailure(f"bridge d={reply_d} does not match spec d={d}")
        self.d = reply_d if family == "categorical" else None

    def _read_loop(self) -> None:
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def _send(self, obj: dict) -> None:
        try:
            self._proc.stdin.write(json.dumps(obj) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, ValueError, OSError) as exc:
            raise ProtocolViolation(f"bridge pipe closed: {exc}") from exc

    def _next_message(self):
        try:
            line = self._lines.get(timeout=self._timeout)
        except queue.Empty:
            raise BridgeTimeout(f"no bridge reply within {self._timeout}s") from None
        if line is None:
            raise ProtocolViolation("bridge closed its output stream")
        try:
            return json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolViolation(f"unparseable bridge reply {line!r}") from exc

    def query(self, coalition: Coalition):
        with self._lock:
            qid = self._next_id
            self._next_id += 1
            self._send({"id": qid, "coalition": list(coalition.members())})
            while qid not in self._pending:
                msg = self._next_message()
                if not isinstance(msg, dict) or "id" not in msg:
                    raise ProtocolViolation(f"reply without id: {msg!r}")
                self._pending[int(msg["id"])] = msg
            msg = self._pending.pop(qid)
        if "error" in msg:
            raise OracleFailure(f"bridge model error: {msg['error']}")
        params = msg.get("params")
        if not isinstance(params, dict):
            raise ProtocolViolation(f"reply without params object: {msg!r}")
        try:
            if self._family == "bernoulli":
                return BernoulliParams(float(params["pi"]))
            if self._family == "gaussian":
                return GaussianParams(float(params["mu"]), float(params["sigma"]))
            logits = params["logits"]
            if not isinstance(logits, list) or len(logits) != self.d:
                raise ProtocolViolation(
                    f"expected {self.d} logits, got {logits!r}"
                )
            return CategoricalParams(tuple(float(v) for v in logits))
        except ProtocolViolation:
            raise
        except Exception as exc:
            raise ProtocolViolation(f"bad params payload {params!r}: {exc}") from exc

    def close(self) -> None:
        proc = getattr(self, "_proc", None)
        if proc is None:
            return
        for stream in (proc.stdin,):
            try:
                stream.close()
            except OSError:
                pass
        try:
            proc.wait(timeout=2.0)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()


def build_bridge_game(
    command, n: int, family: str, d: int | None = None, timeout: float = 10.0
) -> StochasticGame:
    """Wrap an external model process as a memoized stochastic game.

    The returned game exposes the client as ``game.bridge`` so callers can
    close it; queries are forwarded over the stdio protocol.
    """
    client = BridgeClient(command, n, family, d, timeout)
    game = StochasticGame(
        n,
        family,
        client.query,
        d=client.d if family == "categorical" else None,
    )
    game.bridge = client
    return game
