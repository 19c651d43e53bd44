"""Independent reference implementations used as test oracles.

Everything here works on strings and explicit sets, never on the library's
product, observer or fixpoint code, so agreement is evidence rather than
tautology.  The only library type used is :class:`Automaton` for reading
transition tables.
"""

from __future__ import annotations

import itertools
import random

from cosynth.automaton import Automaton
from cosynth.events import plain


def events(names):
    return [plain(n) for n in names]


def random_automaton(rng: random.Random, n_states: int, alphabet, density: float = 0.6,
                     p_marked: float = 0.4, name: str = "A") -> Automaton:
    """Random deterministic partial automaton with integer-string labels."""
    alphabet = list(alphabet)
    rows = []
    for _ in range(n_states):
        row = {}
        for ev in alphabet:
            if rng.random() < density:
                row[ev] = rng.randrange(n_states)
        rows.append(row)
    marked = [q for q in range(n_states) if rng.random() < p_marked]
    return Automaton([str(q) for q in range(n_states)], alphabet, rows, 0, marked, name=name)


def run_word(aut: Automaton, word, start=None):
    """State index after ``word`` or None; events outside the alphabet are
    an error here (callers project first)."""
    q = aut.initial if start is None else start
    for ev in word:
        q = aut.trans[q].get(ev)
        if q is None:
            return None
    return q


def strings_in(aut: Automaton, max_len: int):
    """All ``(word, state)`` with ``word`` in L(aut) and ``|word| <= max_len``."""
    evs = sorted(aut.alphabet)
    out = [((), aut.initial)]
    frontier = [((), aut.initial)]
    for _ in range(max_len):
        nxt = []
        for w, q in frontier:
            for ev in evs:
                d = aut.trans[q].get(ev)
                if d is not None:
                    nxt.append((w + (ev,), d))
        out.extend(nxt)
        frontier = nxt
    return out


def project(word, alphabet):
    return tuple(ev for ev in word if ev in alphabet)


def product_language(factors, max_len: int):
    """``(L, Lm)`` of the synchronous product up to ``max_len``, computed as
    the intersection of inverse projections over all words."""
    sigma = sorted(frozenset().union(*(f.alphabet for f in factors)))
    lang, marked = set(), set()
    for n in range(max_len + 1):
        for word in itertools.product(sigma, repeat=n):
            ends = [run_word(f, project(word, f.alphabet)) for f in factors]
            if any(e is None for e in ends):
                continue
            lang.add(word)
            if all(e in f.marked for e, f in zip(ends, factors)):
                marked.add(word)
    return lang, marked


def automaton_language(aut: Automaton, max_len: int):
    lang, marked = set(), set()
    for w, q in strings_in(aut, max_len):
        lang.add(w)
        if q in aut.marked:
            marked.add(w)
    return lang, marked


def belief_estimates(aut: Automaton, observable, max_len: int) -> dict:
    """Map each observed word to the label set reached by strings of length
    at most ``max_len`` that project onto it."""
    out: dict = {}
    for w, q in strings_in(aut, max_len):
        out.setdefault(project(w, observable), set()).add(aut.labels[q])
    return out


def belief_relation(aut: Automaton, observable, max_obs: int) -> dict:
    """Exact version of :func:`belief_estimates` for observed words of length
    at most ``max_obs``: strings of any length, enumerated modulo the pair
    (observed word, current state), which is all that decides the result."""
    start = ((), aut.initial)
    seen = {start}
    stack = [start]
    while stack:
        seen_word, q = stack.pop()
        for ev, d in aut.trans[q].items():
            w = seen_word + (ev,) if ev in observable else seen_word
            if len(w) > max_obs or (w, d) in seen:
                continue
            seen.add((w, d))
            stack.append((w, d))
    out: dict = {}
    for w, q in seen:
        out.setdefault(w, set()).add(aut.labels[q])
    return out


def reachable(aut: Automaton) -> set:
    seen = {aut.initial}
    stack = [aut.initial]
    while stack:
        q = stack.pop()
        for d in aut.trans[q].values():
            if d not in seen:
                seen.add(d)
                stack.append(d)
    return seen


def can_reach_marked(aut: Automaton, q: int) -> bool:
    """Plain DFS from ``q`` (no backward search, unlike the library)."""
    seen = {q}
    stack = [q]
    while stack:
        x = stack.pop()
        if x in aut.marked:
            return True
        for d in aut.trans[x].values():
            if d not in seen:
                seen.add(d)
                stack.append(d)
    return False


def is_nonblocking(aut: Automaton) -> bool:
    return all(can_reach_marked(aut, q) for q in reachable(aut))


def is_marker_reachable(aut: Automaton) -> bool:
    return bool(reachable(aut) & aut.marked)


def is_marker_reachable_product(factors) -> bool:
    """DFS over state tuples of the synchronous product; all factors marked."""
    sigma = sorted(frozenset().union(*(f.alphabet for f in factors)))
    start = tuple(f.initial for f in factors)
    seen, stack = {start}, [start]
    while stack:
        cur = stack.pop()
        if all(q in f.marked for q, f in zip(cur, factors)):
            return True
        for ev in sigma:
            nxt = []
            for q, f in zip(cur, factors):
                if ev not in f.alphabet:
                    nxt.append(q)
                elif ev in f.trans[q]:
                    nxt.append(f.trans[q][ev])
                else:
                    break
            else:
                nxt = tuple(nxt)
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
    return False


def closed_loop_pairs(plant: Automaton, agent: Automaton):
    """Reachable pairs ``(x, q)`` of plant and agent under shared events, with
    the pair transition map; written as a worklist over pairs."""
    start = (plant.initial, agent.initial)
    seen = {start: {}}
    stack = [start]
    while stack:
        x, q = stack.pop()
        row = {}
        for ev in sorted(plant.alphabet | agent.alphabet):
            x2 = plant.trans[x].get(ev, None) if ev in plant.alphabet else x
            q2 = agent.trans[q].get(ev, None) if ev in agent.alphabet else q
            if x2 is None or q2 is None:
                continue
            row[ev] = (x2, q2)
            if (x2, q2) not in seen:
                seen[(x2, q2)] = {}
                stack.append((x2, q2))
        seen[(x, q)] = row
    return seen


def safe_controllable_strings(plant: Automaton, good: set, uncontrollable, max_len: int) -> set:
    """Strings of the supremal controllable sublanguage of the safe language,
    up to ``max_len``: every prefix stays in ``good`` and no uncontrollable
    continuation (simple paths suffice) leaves it."""
    n = plant.n_states

    def uc_escape(q):
        frontier = [q]
        for _ in range(n):
            nxt = []
            for x in frontier:
                for ev, d in plant.trans[x].items():
                    if ev in uncontrollable:
                        if d not in good:
                            return True
                        nxt.append(d)
            frontier = nxt
        return False

    out = set()
    for w, q in strings_in(plant, max_len):
        states = [plant.initial]
        for ev in w:
            states.append(plant.trans[states[-1]][ev])
        if all(s in good and not uc_escape(s) for s in states):
            out.add(w)
    return out


def random_cnf(rng: random.Random, n_vars: int, n_clauses: int, width: int = 3):
    out = []
    for _ in range(n_clauses):
        vs = rng.sample(range(1, n_vars + 1), min(width, n_vars))
        out.append([v if rng.random() < 0.5 else -v for v in vs])
    return out


def brute_force_sat(n_vars: int, clauses):
    """First satisfying assignment in lexicographic order, or None."""
    for bits in itertools.product((False, True), repeat=n_vars):
        if all(any(bits[abs(x) - 1] == (x > 0) for x in c) for c in clauses):
            return bits
    return None


def isomorphic(a: Automaton, b: Automaton) -> bool:
    """Accessible parts equal up to state renaming (joint BFS from the
    initial states; determinism makes the bijection unique)."""
    if a.alphabet != b.alphabet:
        return False
    pair = {a.initial: b.initial}
    back = {b.initial: a.initial}
    stack = [a.initial]
    while stack:
        x = stack.pop()
        y = pair[x]
        if (x in a.marked) != (y in b.marked):
            return False
        ra, rb = a.trans[x], b.trans[y]
        if ra.keys() != rb.keys():
            return False
        for ev, x2 in ra.items():
            y2 = rb[ev]
            if x2 in pair:
                if pair[x2] != y2:
                    return False
            elif y2 in back:
                return False
            else:
                pair[x2] = y2
                back[y2] = x2
                stack.append(x2)
    return True


def random_instance_document(rng: random.Random, n_events: int = 3, n_states: int = 3,
                             secret: bool = True) -> dict:
    """A random valid instance for the component and pipeline tests."""
    names = list("abcd"[:n_events])
    observable = [e for e in names if rng.random() < 0.75] or [names[0]]
    controllable = [e for e in names if rng.random() < 0.5] or [names[-1]]
    sensors = [{"id": i + 1, "events": [e]} for i, e in enumerate(observable)]
    maskable = [s["id"] for s in sensors if rng.random() < 0.5]
    ed_obs = [e for e in observable if rng.random() < 0.7]
    editable = [e for e in ed_obs if rng.random() < 0.5]
    states = [str(q) for q in range(n_states)]
    trans = []
    for q in states:
        for e in names:
            if rng.random() < 0.5:
                trans.append([q, e, rng.choice(states)])
    gamma = []
    cs = sorted(controllable)
    for mask in range(1, 2 ** len(cs)):
        gamma.append("cmd{" + ",".join(c for j, c in enumerate(cs) if mask >> j & 1) + "}")
    return {
        "name": "random",
        "alphabet": {"events": names, "controllable": controllable, "observable": observable},
        "plant": {
            "states": states, "initial": "0",
            "marked": [q for q in states if rng.random() < 0.5],
            "transitions": trans,
            "secret": [q for q in states[1:] if secret and rng.random() < 0.4],
            "avoid": [q for q in states[1:] if rng.random() < 0.2],
        },
        "sensors": sensors,
        "maskable": maskable,
        "editor": {"observable": ed_obs, "editable": editable, "bound": rng.randint(1, 2)},
        "intruder": {
            "observable_events": [e for e in names if rng.random() < 0.6],
            "observable_commands": [g for g in gamma if rng.random() < 0.5],
        },
    }
