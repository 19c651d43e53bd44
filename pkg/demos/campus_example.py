"""Walk through the bundled campus instance end to end.

The plant can reach its secret state 5 by ``a c e``; the intruder listens
to sensor readings and to the supervisor's commands.  We build the
constraint automata, co-synthesize mask, editor and supervisor, verify
the closed loop, and look at what the intruder sees along the secret run.

Run with ``python3 demos/campus_example.py``.
"""

from cosynth.components import intruder_observed
from cosynth.data import example_instance
from cosynth.events import parse_event
from cosynth.pipeline import STEPS, closed_loop_product, project, run_procedure, runs_with_plant_word

inst = example_instance()
print(inst)
print("decorated alphabet:", len(inst.sigma_b), "events")
print("commands:", " ".join(str(g) for g in inst.gamma))

# %% the full procedure
res = run_procedure(inst)
for step in res.steps:
    print(f"  {step.step:2d} {STEPS[step.step]:<24} {step.sizes}")
print("success:", res.ok)
print("report:", res.report.as_dict())

# %% sizes of the synthesized agents
for key in ("ME", "M", "E", "S"):
    aut = getattr(res, key).automaton
    print(f"{key}: {aut.n_states} states, {aut.n_transitions} transitions")
print("decomposition sizes k, l =", res.decomposition.k, res.decomposition.l)

# %% the secret run as the intruder sees it
loop = closed_loop_product(inst, res.M, res.E, res.S)
secret_run = [{parse_event(x)} for x in ("a", "c+on", "e+off", "f")]
secret_run.append({parse_event("c+on"), parse_event("c+off")})
visible = intruder_observed(inst)
seen = set()
for word in runs_with_plant_word(loop, res.components.G.alphabet, secret_run, tail=2):
    seen.add(" ".join(str(e) for e in project(word, visible)))
print(f"{len(seen)} distinct intruder observations, for example:")
for obs in sorted(seen, key=len)[:5]:
    print("  ", obs)
