"""Command-line surface: explain | verify | fidelity | enumerate-structure.

Every command is deterministic given (spec file, flags, seed): results embed
provenance (spec hash, structure kind, mode, seed, version) and numbers are
serialized with 17 significant digits so doubles round-trip exactly.
stdout stays silent unless --out - selects stream mode; stderr carries
diagnostics only.

Exit codes: 0 success; 1 verify property failure; 2 spec/flag validation;
3 oracle or bridge failure; 4 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys

import numpy as np

from . import __version__
from .errors import (
    BadPermutation,
    BridgeStartFailure,
    BridgeTimeout,
    DistvalError,
    IndexOutOfRange,
    InvalidClasses,
    InvalidWeights,
    NonFinite,
    NormalizationFailure,
    NotNormalized,
    OracleFailure,
    OutOfRange,
    ProtocolViolation,
    SelfMembership,
    SpecValidation,
    TooManyPlayers,
    UnsupportedFamily,
)
from .games import Coalition
from .structures import (
    CoalitionStructure,
    is_efficient,
    is_symmetric,
    make_custom,
    make_leave_one_out,
    make_random_order,
    make_shapley,
    make_size_weighted,
)
from .values import (
    BernoulliValue,
    CategoricalValue,
    GaussianValue,
    exact_value,
    mc_value,
    mc_value_sampled,
    summarize,
)
from .builders import build_game, parse_game_spec
from .verify import SCHEMES, fidelity_trace, run_property_suite

_EXIT_VALIDATION = 2
_EXIT_ORACLE = 3
_EXIT_NUMERIC = 4

_VALIDATION_ERRORS = (
    SpecValidation,
    NotNormalized,
    InvalidWeights,
    BadPermutation,
    SelfMembership,
    InvalidClasses,
    IndexOutOfRange,
    OutOfRange,
    TooManyPlayers,
    UnsupportedFamily,
)
_ORACLE_ERRORS = (OracleFailure, BridgeStartFailure, ProtocolViolation, BridgeTimeout)
_NUMERIC_ERRORS = (NormalizationFailure, NonFinite)


# ---------------------------------------------------------------------------
# Deterministic serialization (17 significant digits)
# ---------------------------------------------------------------------------


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise NonFinite(f"refusing to serialize non-finite value {x!r}")
    out = format(x, ".17g")
    return out


def dumps_17g(obj, indent: int = 0) -> str:
    """JSON text with floats at 17 significant digits; deterministic layout."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        parts = [
            f"{inner}{json.dumps(str(k))}: {dumps_17g(v, indent + 1)}"
            for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(parts) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        items = list(obj)
        if not items:
            return "[]"
        scalars = all(
            isinstance(v, (int, float, np.integer, np.floating)) for v in items
        )
        if scalars:
            return "[" + ", ".join(dumps_17g(v) for v in items) + "]"
        parts = [f"{inner}{dumps_17g(v, indent + 1)}" for v in items]
        return "[\n" + ",\n".join(parts) + "\n" + pad + "]"
    raise SpecValidation(f"cannot serialize {type(obj).__name__}")


def _write_out(text: str, out: str) -> None:
    if out == "-":
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
            if not text.endswith("\n"):
                fh.write("\n")


# ---------------------------------------------------------------------------
# Spec and structure loading
# ---------------------------------------------------------------------------


def _load_game_file(path: str):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise SpecValidation(f"cannot read game spec {path!r}: {exc}") from exc
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SpecValidation(f"game spec {path!r} is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict) or "game" not in obj:
        raise SpecValidation("game spec file must be an object with a 'game' entry")
    spec = parse_game_spec(obj["game"])
    structure_obj = obj.get("structure")
    return spec, structure_obj, hashlib.sha256(raw).hexdigest()


def _structure_from_obj(obj: dict, n: int) -> CoalitionStructure:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise SpecValidation("structure object needs a 'kind'")
    kind = obj["kind"]
    if kind == "shapley":
        return make_shapley(n)
    if kind in ("leave_one_out", "loo"):
        return make_leave_one_out(n)
    if kind == "size_weighted":
        return make_size_weighted(n, obj.get("weights", ()))
    if kind == "random_order":
        perms = obj.get("perms")
        if not isinstance(perms, dict):
            raise SpecValidation("random_order structure needs a 'perms' table")
        table = {
            tuple(int(t) for t in key.split(",")): float(p) for key, p in perms.items()
        }
        return make_random_order(n, table)
    if kind == "custom":
        tables = obj.get("tables")
        if not isinstance(tables, dict):
            raise SpecValidation("custom structure needs a 'tables' object")
        return make_custom(n, tables)
    raise SpecValidation(f"unknown structure kind {kind!r}")


def _load_json_file(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise SpecValidation(f"cannot read {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SpecValidation(f"{path!r} is not valid JSON: {exc}") from exc


def resolve_structure(selector: str | None, spec_structure, n: int) -> CoalitionStructure:
    """CLI flag wins over the spec's embedded structure; default is Shapley."""
    if selector is None:
        if spec_structure is not None:
            return _structure_from_obj(spec_structure, n)
        return make_shapley(n)
    if selector == "shapley":
        return make_shapley(n)
    if selector in ("loo", "leave_one_out"):
        return make_leave_one_out(n)
    for prefix, kind in (("weights:", "size_weighted"), ("perm:", "random_order"), ("custom:", "custom")):
        if selector.startswith(prefix):
            payload = _load_json_file(selector[len(prefix):])
            if kind == "size_weighted":
                return make_size_weighted(n, payload)
            if kind == "random_order":
                return _structure_from_obj({"kind": kind, "perms": payload}, n)
            return _structure_from_obj({"kind": kind, "tables": payload}, n)
    raise SpecValidation(f"unknown structure selector {selector!r}")


# ---------------------------------------------------------------------------
# Result payloads
# ---------------------------------------------------------------------------


def _distribution_payload(value):
    if isinstance(value, BernoulliValue):
        return {
            "q_plus": value.q_plus,
            "q_minus": value.q_minus,
            "q_zero": value.q_zero,
        }
    if isinstance(value, GaussianValue):
        return {
            "components": [
                {"weight": w, "mean": m, "sd": s} for w, m, s in value.components
            ],
            "sign_pmf": {
                "minus": value.sign_pmf[0],
                "zero": value.sign_pmf[1],
                "plus": value.sign_pmf[2],
            },
        }
    return {"d": value.d, "transition": [list(row) for row in value.transition]}


def _stats_payload(value, top_k: int = 3):
    from .values import top_transitions

    stats = summarize(value)
    out = {
        "importance": stats.importance,
        "expectation": list(stats.expectation),
        "variance": stats.variance,
        "entropy": stats.entropy,
    }
    if isinstance(value, CategoricalValue):
        out["mode_change"] = {
            "from": stats.mode_change.from_class,
            "to": stats.mode_change.to_class,
            "probability": stats.mode_change.probability,
        }
        out["flip_away"] = {
            "class": stats.flip_away.from_class,
            "probability": stats.flip_away.probability,
        }
        out["top_transitions"] = [
            {"from": t.from_class, "to": t.to_class, "probability": t.probability}
            for t in top_transitions(value, top_k)
        ]
    else:
        out["mode_change"] = None
        out["flip_away"] = None
        out["top_transitions"] = None
    return out


def _stderr_payload(result):
    if isinstance(result.stderr, np.ndarray):
        return {"transition": [list(row) for row in result.stderr]}
    if isinstance(result.value, GaussianValue):
        return {
            "components": list(result.stderr["components"]),
            "sign_pmf": {
                "minus": result.stderr["sign_pmf"][0],
                "zero": result.stderr["sign_pmf"][1],
                "plus": result.stderr["sign_pmf"][2],
            },
        }
    return dict(result.stderr)


def _explain_csv(players, values) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    sample = values[0]
    if isinstance(sample, CategoricalValue):
        writer.writerow(["player", "from", "to", "prob"])
        for i, v in zip(players, values):
            for s in range(v.d):
                for r in range(v.d):
                    writer.writerow([i, s, r, _fmt_float(float(v.transition[r, s]))])
    elif isinstance(sample, BernoulliValue):
        writer.writerow(["player", "atom", "prob"])
        for i, v in zip(players, values):
            for atom, q in (("plus", v.q_plus), ("minus", v.q_minus), ("zero", v.q_zero)):
                writer.writerow([i, atom, _fmt_float(q)])
    else:
        writer.writerow(["player", "weight", "mean", "sd"])
        for i, v in zip(players, values):
            for w, m, s in v.components:
                writer.writerow([i, _fmt_float(w), _fmt_float(m), _fmt_float(s)])
    return buf.getvalue()


def _gumbel_outcome_oracle(game):
    """Parametric nested-sampling oracle: argmax(theta_S + eps(noise_seed))."""
    eps_cache: dict[int, np.ndarray] = {}

    def oracle(c: Coalition, noise_seed: int) -> int:
        eps = eps_cache.get(noise_seed)
        if eps is None:
            rng = np.random.default_rng(np.random.SeedSequence((noise_seed, 0x6E01)))
            eps = rng.gumbel(size=game.d)
            eps_cache[noise_seed] = eps
        theta = np.asarray(game.payoff(c).theta)
        return int(np.argmax(theta + eps))

    return oracle


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_explain(args) -> int:
    spec, spec_structure, spec_hash = _load_game_file(args.game)
    game = build_game(spec)
    try:
        structure = resolve_structure(args.structure, spec_structure, game.n_players)
        if args.player == "all":
            players = list(range(game.n_players))
        else:
            players = [int(args.player)]
        if args.mode in ("mc", "sampled") and args.samples is None:
            raise SpecValidation(f"--samples is required for mode {args.mode}")
        if args.mode == "sampled" and args.seeds is None:
            raise SpecValidation("--seeds is required for mode sampled")

        results = []
        values = []
        for i in players:
            if args.mode == "exact":
                value = exact_value(game, structure, i, threads=args.threads)
                stderr = None
            elif args.mode == "mc":
                mc = mc_value(
                    game,
                    structure,
                    i,
                    samples=args.samples,
                    seed=args.seed,
                    threads=args.threads,
                )
                value, stderr = mc.value, _stderr_payload(mc)
            else:
                if game.kind != "categorical":
                    raise SpecValidation("sampled mode requires a categorical game")
                value = mc_value_sampled(
                    _gumbel_outcome_oracle(game),
                    structure,
                    i,
                    game.d,
                    coalition_samples=args.samples,
                    seed_count=args.seeds,
                    seed=args.seed,
                )
                stderr = None
            values.append(value)
            entry = {
                "player": i,
                "family": game.kind,
                "distribution": _distribution_payload(value),
                "stats": _stats_payload(value),
                "stderr": stderr,
            }
            results.append(entry)

        if args.format == "csv":
            _write_out(_explain_csv(players, values), args.out)
        else:
            payload = {
                "provenance": _provenance(args, spec, spec_hash, structure, game),
                "results": results,
            }
            _write_out(dumps_17g(payload), args.out)
        return 0
    finally:
        client = getattr(game, "bridge", None)
        if client is not None:
            client.close()


def _provenance(args, spec, spec_hash, structure, game) -> dict:
    return {
        "version": __version__,
        "spec_hash": spec_hash,
        "game_kind": spec.kind,
        "family": game.kind,
        "n_players": game.n_players,
        "d": game.d if game.kind == "categorical" else None,
        "structure": structure.kind,
        "mode": getattr(args, "mode", None),
        "seed": getattr(args, "seed", None),
        "samples": getattr(args, "samples", None),
        "seeds": getattr(args, "seeds", None),
    }


def cmd_verify(args) -> int:
    selection = args.suite.split(",") if args.suite else None
    reports = run_property_suite(
        selection,
        seed=args.seed,
        trials=args.trials,
        tv_samples=args.tv_samples,
        threads=args.threads,
        structure_kind=args.structure,
    )
    payload = {
        "provenance": {
            "version": __version__,
            "seed": args.seed,
            "trials": args.trials,
            "tv_samples": args.tv_samples,
            "structure": args.structure,
        },
        "reports": [r.to_json() for r in reports],
    }
    _write_out(dumps_17g(payload), args.out)
    return 1 if any(r.status == "fail" for r in reports) else 0


def cmd_fidelity(args) -> int:
    spec, spec_structure, spec_hash = _load_game_file(args.game)
    game = build_game(spec)
    try:
        if game.kind != "categorical":
            raise InvalidClasses("fidelity requires a categorical game")
        structure = resolve_structure(args.structure, spec_structure, game.n_players)
        try:
            c1_txt, c2_txt = args.fidelity_classes.split(",")
            c1, c2 = int(c1_txt), int(c2_txt)
        except ValueError as exc:
            raise InvalidClasses(
                f"--fidelity-classes must be 'C1,C2', got {args.fidelity_classes!r}"
            ) from exc
        steps = args.steps if args.steps is not None else game.n_players
        values = [exact_value(game, structure, i) for i in range(game.n_players)]
        schemes = list(SCHEMES) if args.scheme == "all" else [args.scheme]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["step", "scheme", "removed_player", "p_c1", "p_c2"])
        for scheme in schemes:
            trace = fidelity_trace(game, values, c1, c2, scheme, steps)
            for row in trace.steps:
                writer.writerow(
                    [
                        row.step,
                        scheme,
                        "" if row.removed_player is None else row.removed_player,
                        _fmt_float(row.p_c1),
                        _fmt_float(row.p_c2),
                    ]
                )
        _write_out(buf.getvalue(), args.out)
        return 0
    finally:
        client = getattr(game, "bridge", None)
        if client is not None:
            client.close()


def cmd_enumerate_structure(args) -> int:
    spec, spec_structure, spec_hash = _load_game_file(args.game)
    n = spec.n_players
    structure = resolve_structure(args.structure, spec_structure, n)
    tables = {}
    for i in range(n):
        tables[str(i)] = {c.key(): p for p, c in structure.support(i)}
    if args.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["player", "coalition", "prob"])
        for i in range(n):
            for key, p in tables[str(i)].items():
                writer.writerow([i, key, _fmt_float(p)])
        _write_out(buf.getvalue(), args.out)
        return 0
    payload = {
        "provenance": {
            "version": __version__,
            "spec_hash": spec_hash,
            "structure": structure.kind,
        },
        "n_players": n,
        "kind": structure.kind,
        "efficient": is_efficient(structure).efficient,
        "symmetric": is_symmetric(structure),
        "tables": tables,
    }
    _write_out(dumps_17g(payload), args.out)
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="distval",
        description="Distributional values for stochastic cooperative games",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, game_required=True):
        if game_required:
            p.add_argument("--game", required=True, help="path to the game spec JSON")
        p.add_argument(
            "--structure",
            default=None,
            help="shapley | loo | weights:FILE | perm:FILE | custom:FILE",
        )
        p.add_argument("--out", default="-", help="output path; '-' streams to stdout")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("explain", help="compute distributional values")
    common(p)
    p.add_argument("--player", default="all", help="player index or 'all'")
    p.add_argument("--mode", choices=("exact", "mc", "sampled"), default="exact")
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--seeds", type=int, default=None, help="noise seeds (sampled mode)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(fn=cmd_explain)

    p = sub.add_parser("verify", help="run the property suite")
    p.add_argument("--suite", default=None, help="comma-separated property ids")
    p.add_argument("--structure", default=None, help="restrict structure kind (e.g. loo)")
    p.add_argument("--out", default="-")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--tv-samples", dest="tv_samples", type=int, default=1_000_000)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("fidelity", help="cumulative-removal fidelity trace (CSV)")
    common(p)
    p.add_argument("--fidelity-classes", required=True, help="C1,C2")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--scheme", choices=("A", "B", "C", "all"), default="all")
    p.set_defaults(fn=cmd_fidelity)

    p = sub.add_parser("enumerate-structure", help="dump per-player PMF tables")
    common(p)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(fn=cmd_enumerate_structure)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except _NUMERIC_ERRORS as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return _EXIT_NUMERIC
    except _ORACLE_ERRORS as exc:
        print(f"oracle failure: {exc}", file=sys.stderr)
        return _EXIT_ORACLE
    except _VALIDATION_ERRORS as exc:
        print(f"invalid specification: {exc}", file=sys.stderr)
        return _EXIT_VALIDATION
    except DistvalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
