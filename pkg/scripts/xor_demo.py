"""Walk through the XOR game: the aggregation-bias showcase.

The standard value of both players is 0 even though each one flips the
outcome whenever it joins a coalition; the distributional value keeps the
two opposing flips visible.
"""
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from distval import (
    bernoulli_variance,
    entropy,
    exact_value,
    expectation,
    importance,
    make_shapley,
    xor_game,
)


def main() -> None:
    game = xor_game()
    structure = make_shapley(2)
    print("player  q_plus  q_minus  q_zero  importance  std.value  variance  entropy")
    for i in range(2):
        v = exact_value(game, structure, i)
        print(
            f"{i:6d}  {v.q_plus:6.3f}  {v.q_minus:7.3f}  {v.q_zero:6.3f}"
            f"  {importance(v):10.3f}  {expectation(v):9.3f}"
            f"  {bernoulli_variance(v):8.3f}  {entropy(v):7.4f}"
        )


if __name__ == "__main__":
    main()
