"""Split a joint agent into two agents with separate control authority.

A two-state specification over a, b, c is split between an agent that
controls a and one that controls b; neither controls c.  Sizes grow until
the SAT encoding has a model, and the result is checked independently.
"""

import tempfile
from pathlib import Path

from cosynth.automaton import Automaton
from cosynth.events import parse_event
from cosynth.problem import ControlConstraint, SatBounds
from cosynth.sat import check_decomposition, decompose, encode, expected_counts

a, b, c = (parse_event(x) for x in "abc")
me = Automaton.from_edges(["0", "1"], [a, b, c],
                          [("0", a, "1"), ("1", b, "1"), ("0", c, "0"), ("1", c, "0")], "0", ["1"], name="ME")
plant = Automaton.from_edges(["p", "q", "r"], [a, b, c],
                             [("p", a, "q"), ("q", b, "r"), ("r", c, "p"), ("p", c, "p")], "p", ["r"], name="Q")
c_m = ControlConstraint({a}, {a, b})
c_e = ControlConstraint({b}, {a, b, c})

# %% search over sizes
dec = decompose(me, c_m, c_e, plant, SatBounds(1, 1, 3, 3, 50), log=print)
print("found k, l =", dec.k, dec.l)
print(dec.M.automaton.to_json())
print(dec.E.automaton.to_json())
print("independent check problems:", check_decomposition(dec.M.automaton, dec.E.automaton, me, plant))

# %% the formula itself, for an external solver
cnf = encode(me, c_m, c_e, plant, 2, 2, 6)
print("counts", cnf.meta["counts"], "closed form", expected_counts(2, 2, 3, me.n_states, plant.n_states, 6))
out = Path(tempfile.mkdtemp()) / "toy.cnf"
cnf.write_dimacs(out)
print("wrote", out, "with header", out.read_text().splitlines()[0])
