"""Fidelity study on the synthetic 10-feature, 3-class game.

Removes players in the order induced by (A) the c2->c1 transition
probabilities, (B) the standard value for c1, (C) the negated standard value
for c2, and prints the tracked class probabilities per step.
"""
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from distval import build_game, exact_values, make_shapley, parse_game_spec
from distval.verify import fidelity_trace, make_fidelity_demo_spec


def main() -> None:
    game = build_game(parse_game_spec(make_fidelity_demo_spec()))
    values = exact_values(game, make_shapley(game.n_players))
    for scheme in ("A", "B", "C"):
        trace = fidelity_trace(game, values, 0, 1, scheme, game.n_players)
        print(f"scheme {scheme}: removal order {trace.order}")
        for step in trace.steps:
            removed = "-" if step.removed_player is None else step.removed_player
            print(
                f"  step {step.step:2d}  removed {removed!s:>2}  "
                f"P(c1)={step.p_c1:.4f}  P(c2)={step.p_c2:.4f}"
            )


if __name__ == "__main__":
    main()
