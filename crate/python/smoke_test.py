#!/usr/bin/env python3
"""Smoke test for the mobility_game extension module.

Builds nothing itself: run `cargo build -p mobility-py` first (or
`--release`), then `python3 python/smoke_test.py`. The script copies the
compiled cdylib next to itself under the importable name.
"""

import pathlib
import shutil
import sys
from fractions import Fraction

HERE = pathlib.Path(__file__).resolve().parent
ROOT = HERE.parent


def locate_module():
    candidates = [
        ROOT / "target" / profile / name
        for profile in ("release", "debug")
        for name in ("libmobility_game.so", "mobility_game.so", "libmobility_game.dylib")
    ]
    built = [p for p in candidates if p.exists()]
    if not built:
        sys.exit("build the bindings first: cargo build -p mobility-py")
    newest = max(built, key=lambda p: p.stat().st_mtime)
    target = HERE / "mobility_game.so"
    shutil.copyfile(newest, target)
    return target


locate_module()
sys.path.insert(0, str(HERE))
import mobility_game  # noqa: E402


def main():
    # Parse the bundled instance and check the headline numbers.
    text = (ROOT / "instances" / "showcase.toml").read_text()
    inst = mobility_game.parse_instance(text)
    assert inst.num_travelers == 20
    assert inst.capacities == [1, 4, 5, 10]
    assert inst.balanced

    result = mobility_game.solve(inst)
    assert result.objective == "78.000000", result.objective
    assert result.stable
    assert all(m is not None for m in result.matches)

    # Round trip through TOML text.
    again = mobility_game.parse_instance(inst.to_toml())
    assert again.payoff_matrix() == inst.payoff_matrix()

    # A generated instance: solver agrees with the exhaustive oracle and
    # the mechanism balances its books from the reported transfers.
    gen = mobility_game.generate_instance(seed=42, travelers=5, providers=2)
    solved = mobility_game.solve(gen)
    assert solved.objective == mobility_game.oracle_objective(gen)
    for _, _, payment in solved.payments:
        Fraction(payment)  # every payment is a clean decimal

    mech = mobility_game.run_mechanism(gen)
    assert mech.matches == solved.matches
    budget = Fraction(mech.budget)
    charges = sum(Fraction(c) for c in mech.traveler_charges)
    comps = sum(Fraction(c) for c in mech.provider_compensations)
    assert budget == charges - comps, (budget, charges, comps)
    assert all(Fraction(u) >= 0 for u in mech.traveler_utilities)
    assert all(Fraction(u) >= 0 for u in mech.provider_utilities)

    # Truth-telling never loses on the report grid.
    for i in range(gen.num_travelers):
        assert Fraction(mobility_game.max_misreport_regret(gen, traveler=i)) <= 0
    for j in range(gen.num_providers):
        assert Fraction(mobility_game.max_misreport_regret(gen, provider=j)) <= 0

    print("smoke test passed")


if __name__ == "__main__":
    main()
