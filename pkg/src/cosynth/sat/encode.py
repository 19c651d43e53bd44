"""Propositional encoding of the mask/editor decomposition problem.

Given the synthesized ensemble ``ME``, the two control constraints and the
product plant ``G||CE||MC||EC||SC||I``, :func:`encode` builds a CNF whose
models are exactly the k-state masks ``M`` and l-state editors ``E`` with

* ``L(M||E) ⊆ L(ME)`` and ``L_m(M||E) ⊆ L_m(ME)`` (inductive invariant over
  the completed automata), and
* a marked state of ``M||E||product`` reachable within ``horizon - 1`` steps.

Variable families: ``tM``/``mM`` (mask transitions and marking, state ``k``
is the dump), ``tE``/``mE`` (editor, dump ``l``), ``r`` (invariant over
``M̄||Ē||M̄Ē``), ``rt`` (bounded reachability), and the Tseitin auxiliaries
``step`` (one predecessor move), ``hit`` (pair reaches a marked state)
and ``goal`` (marked pair that hits).  Implications whose antecedent is a conjunction
or disjunction of literals are written directly as clauses.
"""

from __future__ import annotations

from collections import deque

from ..automaton import Automaton, completion
from ..problem import ControlConstraint
from .cnf import CnfInstance

__all__ = ["EncodingError", "encode", "expected_counts", "product_distances"]


class EncodingError(ValueError):
    pass


def expected_counts(k: int, l: int, n_events: int, n_me: int, n_product: int, horizon: int) -> dict:
    """Closed-form sizes of the four variable families."""
    return {
        "X": (k + 1) ** 2 * n_events + k,
        "Y": (l + 1) ** 2 * n_events + l,
        "Z": (k + 1) * (l + 1) * (n_me + 1),
        "R": k * l * n_product * horizon,
    }


def product_distances(product: Automaton) -> list[int]:
    """BFS distance of every product state from the initial state."""
    inf = product.n_states + 1
    dist = [inf] * product.n_states
    dist[product.initial] = 0
    queue = deque([product.initial])
    while queue:
        q = queue.popleft()
        for d in product.trans[q].values():
            if dist[d] == inf:
                dist[d] = dist[q] + 1
                queue.append(d)
    return dist


def encode(me: Automaton, c_m: ControlConstraint, c_e: ControlConstraint, product: Automaton,
           k: int, l: int, horizon: int, simplify: bool = True, structural_only: bool = False,
           single_choice: bool = False) -> CnfInstance:
    """Build the decomposition CNF.

    ``simplify`` replaces reachability variables that are provably false
    (the product state lies farther than ``t`` steps from the initial state)
    by unit clauses and omits the auxiliaries that would mention them; the
    result is logically equivalent and allocates the same X, Y, Z and R
    families.  ``structural_only`` stops after the invariant part (no
    reachability), a relaxation used to detect unsatisfiability early.
    ``single_choice`` adds binary clauses allowing each mask or editor state
    at most one enabled controllable event; models are still decompositions.
    """
    if k < 1 or l < 1:
        raise EncodingError("k and l must be at least 1")
    if me.alphabet != product.alphabet:
        diff = sorted(str(e) for e in me.alphabet ^ product.alphabet)
        raise EncodingError(f"ME and product alphabets differ: {diff[:6]}")
    n_prod = product.n_states
    if not structural_only and not 1 <= horizon <= k * l * n_prod:
        raise EncodingError(f"horizon must lie in [1, {k * l * n_prod}]")

    sigma = sorted(me.alphabet)
    ns = len(sigma)
    me_bar = completion(me)
    n_me = me.n_states
    dump = n_me

    cnf = CnfInstance()
    m_lab = [f"q{i}" for i in range(k)] + ["dump"]
    e_lab = [f"q{j}" for j in range(l)] + ["dump"]
    ev_lab = [str(e) for e in sigma]
    me_names = me.state_names() + ["dump"]
    tM = cnf.block("tM", m_lab, ev_lab, m_lab)
    mM = cnf.block("mM", m_lab[:k])
    tE = cnf.block("tE", e_lab, ev_lab, e_lab)
    mE = cnf.block("mE", e_lab[:l])
    r = cnf.block("r", m_lab, e_lab, me_names)
    T = 0 if structural_only else horizon
    rt = cnf.block("rt", range(T), m_lab[:k], e_lab[:l], range(n_prod)) if T else None
    cnf.meta.update(k=k, l=l, horizon=T, events=ev_lab, n_me=n_me, n_product=n_prod,
                    simplify=simplify, structural_only=structural_only,
                    single_choice=single_choice,
                    m_controllable=sorted(str(e) for e in c_m.controllable & me.alphabet),
                    m_observable=sorted(str(e) for e in c_m.observable & me.alphabet),
                    e_controllable=sorted(str(e) for e in c_e.controllable & me.alphabet),
                    e_observable=sorted(str(e) for e in c_e.observable & me.alphabet))
    counts = {"X": tM.size + mM.size, "Y": tE.size + mE.size, "Z": r.size, "R": rt.size if rt else 0}
    want = expected_counts(k, l, ns, n_me, n_prod, T)
    if counts != want:
        raise EncodingError(f"variable counts {counts} differ from the closed form {want}")
    cnf.meta["counts"] = counts

    add = cnf.add
    tm = tM.id
    te = tE.id

    # dump states self-loop on every event
    for s in range(ns):
        add([tm(k, s, k)])
    for s in range(ns):
        add([te(l, s, l)])
    # deterministic and total
    for size, tvar in ((k, tm), (l, te)):
        for i in range(size):
            for s in range(ns):
                for j in range(size + 1):
                    for h in range(j + 1, size + 1):
                        add([-tvar(i, s, j), -tvar(i, s, h)])
        for i in range(size):
            for s in range(ns):
                add([tvar(i, s, j) for j in range(size + 1)])
    # controllability (uncontrollable never to dump) and observability
    for size, tvar, cons in ((k, tm, c_m), (l, te, c_e)):
        for s, ev in enumerate(sigma):
            uc = ev not in cons.controllable
            uo = ev not in cons.observable
            for i in range(size):
                if uc:
                    add([tvar(i, s, j) for j in range(size)])
                if uo:
                    for j in range(size):
                        if j != i:
                            add([-tvar(i, s, j), tvar(i, s, i)])
    if single_choice:
        for size, tvar, cons in ((k, tm, c_m), (l, te, c_e)):
            ctrl = [s for s, ev in enumerate(sigma) if ev in cons.controllable]
            for i in range(size):
                for x, s1 in enumerate(ctrl):
                    for s2 in ctrl[x + 1:]:
                        add([tvar(i, s1, size), tvar(i, s2, size)])
    # inductive invariant of M̄||Ē||M̄Ē
    rv = r.id
    add([rv(0, 0, me.initial)])
    for q in range(n_me + 1):
        row = me_bar.trans[q]
        for s, ev in enumerate(sigma):
            q2 = row[ev]
            for i in range(k + 1):
                for i2 in range(k + 1):
                    a = tm(i, s, i2)
                    for j in range(l + 1):
                        src = rv(i, j, q)
                        for j2 in range(l + 1):
                            add([-src, -a, -te(j, s, j2), rv(i2, j2, q2)])
    for i in range(k):
        for j in range(l):
            add([-rv(i, j, dump)])
    unmarked = [q for q in range(n_me) if q not in me.marked] + [dump]
    for i in range(k):
        for j in range(l):
            for q in unmarked:
                add([-mM.id(i), -mE.id(j), -rv(i, j, q)])
    if structural_only:
        return cnf

    # bounded reachability in M||E||product
    dist = product_distances(product) if simplify else [0] * n_prod
    pred: list[list[tuple[int, int]]] = [[] for _ in range(n_prod)]
    ev_index = {ev: s for s, ev in enumerate(sigma)}
    for q, row in enumerate(product.trans):
        for ev, d in row.items():
            pred[d].append((q, ev_index[ev]))
    rid = rt.id
    q0 = product.initial
    add([rid(0, 0, 0, q0)])
    for i in range(k):
        for j in range(l):
            for q in range(n_prod):
                if (i, j, q) != (0, 0, q0):
                    add([-rid(0, i, j, q)])
    step_aux = cnf.sparse("step")
    new_var = cnf.new_var
    for t in range(T - 1):
        for i2 in range(k):
            for j2 in range(l):
                for q2 in range(n_prod):
                    nxt = rid(t + 1, i2, j2, q2)
                    stay = rid(t, i2, j2, q2)
                    if dist[q2] > t + 1:
                        add([-nxt])
                        continue
                    alts = []
                    for q, s in pred[q2]:
                        if dist[q] > t:
                            continue
                        for i in range(k):
                            mt = tm(i, s, i2)
                            for j in range(l):
                                et = te(j, s, j2)
                                cur = rid(t, i, j, q)
                                a = new_var(step_aux, (t, i, j, q, s, i2, j2))
                                add([-a, cur])
                                add([-a, mt])
                                add([-a, et])
                                add([a, -cur, -mt, -et])
                                add([nxt, -a])
                                alts.append(a)
                    add([-nxt, stay] + alts)
                    add([nxt, -stay])
    hit_aux = cnf.sparse("hit")
    goal_aux = cnf.sparse("goal")
    marked = sorted(product.marked)
    goals = []
    for i in range(k):
        for j in range(l):
            hits = [rid(t, i, j, q) for t in range(T) for q in marked if dist[q] <= t]
            h = new_var(hit_aux, (i, j))
            add([-h] + hits)
            for x in hits:
                add([h, -x])
            g = new_var(goal_aux, (i, j))
            add([-g, mM.id(i)])
            add([-g, mE.id(j)])
            add([-g, h])
            add([g, -mM.id(i), -mE.id(j), -h])
            goals.append(g)
    add(goals)
    return cnf
