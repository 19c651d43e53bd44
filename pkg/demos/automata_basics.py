"""Products and observers on two small automata.

This is the machinery every other stage is built from.
"""

from cosynth.automaton import Automaton, observer, sync_product
from cosynth.events import parse_event

a, b, c = (parse_event(x) for x in "abc")

# %% two machines sharing the event b
left = Automaton.from_edges(["0", "1"], [a, b], [("0", a, "1"), ("1", b, "0")], "0", ["0"], name="L")
right = Automaton.from_edges(["x", "y"], [b, c], [("x", b, "y"), ("y", c, "x")], "x", ["x"], name="R")
both = sync_product([left, right])
print(both.to_dot())

# b needs both sides; a and c interleave freely
for word in ([a, b, c], [a, c], [a, b, a, c, b]):
    q = both.run(word)
    print(" ".join(map(str, word)), "->", None if q is None else both.labels[q])

# %% what an observer of b and c alone believes
obs = observer(both, {b, c})
for q, belief in enumerate(obs.labels):
    print(q, belief, {str(e): d for e, d in obs.trans[q].items()})
