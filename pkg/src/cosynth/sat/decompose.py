"""Decomposing the mask-editor ensemble into a mask and an editor via SAT."""

from __future__ import annotations

import time
from dataclasses import dataclass

from ..automaton import Automaton, completion, restrict, sync_product
from ..problem import ControlConstraint, SatBounds
from ..synthesis import AgentAutomaton, contract_violations
from .cnf import CnfInstance, SatModel, read_model
from .encode import EncodingError, encode, product_distances
from .solver import UNSAT, SolverTimeout, solve

__all__ = [
    "Attempt",
    "Decomposition",
    "DecompositionFailed",
    "extract",
    "check_decomposition",
    "reachable_product",
    "prepare_product",
    "witness_lower_bound",
    "model_invariant_violations",
    "decompose",
    "decompose_with_model",
    "DEFAULT_MAX_CLAUSES",
]

DEFAULT_MAX_CLAUSES = 8_000_000


@dataclass
class Attempt:
    k: int
    l: int
    horizon: int
    outcome: str            # sat | unsat | unsat-structural | timeout | too-large | rejected
    conclusive: bool
    n_vars: int = 0
    n_clauses: int = 0
    seconds: float = 0.0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class Decomposition:
    M: AgentAutomaton
    E: AgentAutomaton
    k: int
    l: int
    horizon: int
    attempts: list
    cnf: CnfInstance | None = None
    model: SatModel | None = None
    marking_saturated: bool = False

    def blocking_literals(self) -> list[int]:
        """Literals of the mask/editor rows in the model, for ``--retry-decompose``."""
        return _row_literals(self.cnf, self.model)


class DecompositionFailed(Exception):
    def __init__(self, message, attempts=()):
        super().__init__(message)
        self.attempts = list(attempts)


def _row_literals(cnf: CnfInstance, model: SatModel) -> list[int]:
    out = []
    for name, size in (("tM", cnf.meta["k"]), ("tE", cnf.meta["l"])):
        blk = cnf.blocks[name]
        n_ev = len(blk.dims[1])
        width = len(blk.dims[2])
        for i in range(size):
            for s in range(n_ev):
                for j in range(width):
                    v = blk.id(i, s, j)
                    out.append(v if model[v] else -v)
    return out


def extract(model: SatModel, cnf: CnfInstance, c_m: ControlConstraint, c_e: ControlConstraint,
            alphabet) -> tuple[AgentAutomaton, AgentAutomaton]:
    """Read ``M`` and ``E`` off a model; dump-bound transitions are dropped."""
    events = {str(e): e for e in alphabet}
    ev_order = [events[n] for n in cnf.meta["events"]]
    out = []
    for prefix, size, cons, name in (("M", cnf.meta["k"], c_m, "M"), ("E", cnf.meta["l"], c_e, "E")):
        tb = cnf.blocks["t" + prefix]
        mb = cnf.blocks["m" + prefix]
        rows = []
        for i in range(size):
            row = {}
            for s, ev in enumerate(ev_order):
                targets = [j for j in range(size + 1) if model[tb.id(i, s, j)]]
                if len(targets) != 1:
                    raise EncodingError(f"model gives {prefix} state {i} on {ev} targets {targets}")
                if targets[0] < size:
                    row[ev] = targets[0]
            rows.append(row)
        marked = [i for i in range(size) if model[mb.id(i)]]
        labels = [f"{name.lower()}{i}" for i in range(size)]
        aut = Automaton(labels, alphabet, rows, 0, marked, name=name)
        problems = contract_violations(aut, cons)
        if problems:
            raise EncodingError(f"extracted {name} breaks its contract: {problems[:3]}")
        out.append(AgentAutomaton(aut, cons))
    return out[0], out[1]


def check_decomposition(M: Automaton, E: Automaton, ME: Automaton, product: Automaton) -> list[str]:
    """Independent checks: language and marked-language inclusion in ``ME``
    and marker-reachability of ``product||M||E``."""
    problems = []
    me_bar = completion(ME)
    dump = ME.n_states
    trip = sync_product([M, E, me_bar], name="M||E||MEbar")
    for q, lab in enumerate(trip.labels):
        qm, qe, qme = (M.index_of(lab[0]), E.index_of(lab[1]), me_bar.index_of(lab[2]))
        if qme == dump:
            problems.append(f"L(M||E) not in L(ME): {_word(trip, q)}")
            break
        if qm in M.marked and qe in E.marked and qme not in ME.marked:
            problems.append(f"Lm(M||E) not in Lm(ME): {_word(trip, q)}")
            break
    full = sync_product([product, M, E])
    if not full.is_marker_reachable():
        problems.append("product||M||E is not marker-reachable")
    return problems


def _word(aut: Automaton, target: int) -> str:
    w = aut.shortest_path(lambda q: q == target)
    return " ".join(str(e) for e in w) if w else "<empty>"


def reachable_product(product: Automaton, me: Automaton) -> Automaton:
    """``product`` restricted to the states reachable in ``product||ME``.

    Every run of ``product||M||E`` with ``L(M||E) ⊆ L(ME)`` stays inside
    this set, so the restriction preserves satisfiability.
    """
    joint = sync_product([product, me])
    width = len(product.components)
    keep = set()
    for lab in joint.labels:
        sub = lab[:width] if width > 1 else lab[0]
        keep.add(product.index_of(sub))
    return restrict(product, keep, name=product.name)


def prepare_product(product: Automaton, me: Automaton, exclude=None,
                    restrict_to_me: bool = True) -> Automaton:
    """Drop states whose label satisfies ``exclude``, then restrict to
    what ``ME`` can reach (see :func:`reachable_product`)."""
    if exclude is not None:
        keep = [q for q, lab in enumerate(product.labels) if not exclude(lab)]
        if product.initial not in keep:
            raise ValueError("the excluded set contains the initial product state")
        product = restrict(product, keep, name=product.name)
    if restrict_to_me:
        product = reachable_product(product, me)
    return product


def witness_lower_bound(product: Automaton, me: Automaton) -> int | None:
    """Length of the shortest word reaching a marked product state inside
    ``product||ME``; None if no marked state is reachable there."""
    joint = sync_product([product, me])
    width = len(product.components)
    marked_labels = {product.labels[q] for q in product.marked}

    def hit(q):
        lab = joint.labels[q]
        return (lab[:width] if width > 1 else lab[0]) in marked_labels

    w = joint.shortest_path(hit)
    return None if w is None else len(w)


def model_invariant_violations(model: SatModel, cnf: CnfInstance) -> list[str]:
    """Reachability flags must be monotone in the time index."""
    if not cnf.meta.get("horizon"):
        return []
    blk = cnf.blocks["rt"]
    T, k, l, n = blk.shape
    out = []
    for t in range(T - 1):
        for i in range(k):
            for j in range(l):
                for q in range(n):
                    if model[blk.id(t, i, j, q)] and not model[blk.id(t + 1, i, j, q)]:
                        out.append(f"rt[{t},{i},{j},{q}] true but not at t+1")
    return out


def _estimate_clauses(product: Automaton, k: int, l: int, horizon: int, dist) -> int:
    edges = 0
    for t in range(horizon - 1):
        for q, row in enumerate(product.trans):
            if dist[q] <= t:
                edges += len(row)
    return 5 * k * l * k * l * edges + 3 * k * l * product.n_states * horizon


def _pairs(bounds: SatBounds, independent: bool):
    if not independent:
        k, l = bounds.k0, bounds.l0
        while k <= bounds.k_max and l <= bounds.l_max:
            yield k, l
            k += 1
            l += 1
        return
    grid = [(k, l) for k in range(bounds.k0, bounds.k_max + 1) for l in range(bounds.l0, bounds.l_max + 1)]
    grid.sort(key=lambda kl: (kl[0] + kl[1], kl))
    yield from grid


def _saturate(dec_m: AgentAutomaton, dec_e: AgentAutomaton, me, product):
    """Mark every state of M and E if the checks still pass."""
    def all_marked(a: AgentAutomaton):
        aut = a.automaton
        return AgentAutomaton(Automaton(aut.labels, aut.alphabet, aut.trans, aut.initial,
                                        range(aut.n_states), name=aut.name), a.constraint)

    m2, e2 = all_marked(dec_m), all_marked(dec_e)
    if check_decomposition(m2.automaton, e2.automaton, me, product):
        return dec_m, dec_e, False
    return m2, e2, True


def decompose(me: Automaton, c_m: ControlConstraint, c_e: ControlConstraint, product: Automaton,
              bounds: SatBounds = SatBounds(), backend: str = "auto", timeout: float | None = None,
              max_clauses: int = DEFAULT_MAX_CLAUSES, blocked=(), independent: bool = False,
              simplify: bool = True, saturate_marking: bool = True, restrict_to_me: bool = True,
              horizon_rounds: int = 3, exclude=None, single_choice: bool = False,
              log=None) -> Decomposition:
    """Search ``(k, l)`` and the horizon until a model decomposes ``ME``.

    For each size the horizon starts just above the shortest marked witness
    of ``product||ME`` and doubles, at most ``horizon_rounds`` times before
    moving to the next size; the last size keeps doubling up to the cap.
    ``blocked`` holds ``(k, l, literals)`` triples from earlier models to be
    excluded.  ``exclude`` (a predicate on product state labels) removes
    product states before encoding: the witness then avoids them, which is
    stronger than required, so every model is still a decomposition.
    Raises :class:`DecompositionFailed` when the bounds run out.
    """
    log = log or (lambda msg: None)
    attempts: list[Attempt] = []
    try:
        product = prepare_product(product, me, exclude, restrict_to_me)
    except ValueError as exc:
        raise DecompositionFailed(str(exc), attempts) from exc
    lower = witness_lower_bound(product, me)
    if lower is None:
        raise DecompositionFailed("no marked product state is reachable under ME", attempts)
    dist = product_distances(product) if simplify else None
    pairs = list(_pairs(bounds, independent))
    for n_pair, (k, l) in enumerate(pairs):
        last_pair = n_pair == len(pairs) - 1
        t0 = time.monotonic()
        structural = encode(me, c_m, c_e, product, k, l, 0, structural_only=True,
                            single_choice=single_choice)
        extra = [[-x for x in lits] for bk, bl, lits in blocked if (bk, bl) == (k, l)]
        res = solve(structural, backend=backend, timeout=timeout, extra_clauses=extra)
        if res is UNSAT:
            attempts.append(Attempt(k, l, 0, "unsat-structural", True, structural.n_vars,
                                    structural.n_clauses, time.monotonic() - t0))
            log(f"k={k} l={l}: invariant part unsatisfiable")
            continue
        full_h = k * l * product.n_states
        cap = min(full_h, bounds.horizon_cap)
        horizon = min(cap, lower + 1)
        rounds = 0
        while True:
            rounds += 1
            if simplify and _estimate_clauses(product, k, l, horizon, dist) > max_clauses:
                attempts.append(Attempt(k, l, horizon, "too-large", False))
                log(f"k={k} l={l} T={horizon}: encoding would exceed {max_clauses} clauses")
                break
            t0 = time.monotonic()
            cnf = encode(me, c_m, c_e, product, k, l, horizon, simplify=simplify,
                         single_choice=single_choice)
            try:
                res = solve(cnf, backend=backend, timeout=timeout, extra_clauses=extra)
            except SolverTimeout:
                attempts.append(Attempt(k, l, horizon, "timeout", False, cnf.n_vars, cnf.n_clauses,
                                        time.monotonic() - t0))
                break
            took = time.monotonic() - t0
            if res is not UNSAT:
                m, e = extract(res, cnf, c_m, c_e, me.alphabet)
                problems = check_decomposition(m.automaton, e.automaton, me, product)
                problems += model_invariant_violations(res, cnf)
                if problems:
                    raise AssertionError("SAT model failed the independent checks: " + "; ".join(problems))
                attempts.append(Attempt(k, l, horizon, "sat", True, cnf.n_vars, cnf.n_clauses, took))
                log(f"k={k} l={l} T={horizon}: satisfiable ({cnf.n_vars} vars, {cnf.n_clauses} clauses)")
                saturated = False
                if saturate_marking:
                    m, e, saturated = _saturate(m, e, me, product)
                return Decomposition(m, e, k, l, horizon, attempts, cnf, res, saturated)
            attempts.append(Attempt(k, l, horizon, "unsat", horizon == full_h, cnf.n_vars, cnf.n_clauses,
                                    took))
            log(f"k={k} l={l} T={horizon}: unsatisfiable")
            if horizon >= cap or (rounds >= horizon_rounds and not last_pair):
                break
            horizon = min(cap, 2 * horizon)
    raise DecompositionFailed("no decomposition within the configured bounds", attempts)


def decompose_with_model(me, c_m, c_e, product, k, l, horizon, model,
                         simplify: bool = True, restrict_to_me: bool = True, exclude=None,
                         single_choice: bool = False) -> Decomposition:
    """Rebuild the encoding and extract ``M``/``E`` from an external model.

    ``model`` is a :class:`SatModel` or a model file path/text; the product
    preparation options must match those used when the CNF was exported.
    """
    product = prepare_product(product, me, exclude, restrict_to_me)
    cnf = encode(me, c_m, c_e, product, k, l, horizon, simplify=simplify, single_choice=single_choice)
    if not isinstance(model, SatModel):
        model = read_model(model, cnf.n_vars)
    if model.n_vars != cnf.n_vars:
        raise ValueError(f"model covers {model.n_vars} variables, encoding has {cnf.n_vars}")
    if not cnf.evaluate(model):
        raise ValueError("model does not satisfy the encoding")
    m, e = extract(model, cnf, c_m, c_e, me.alphabet)
    problems = check_decomposition(m.automaton, e.automaton, me, product)
    if problems:
        raise AssertionError("external model failed the independent checks: " + "; ".join(problems))
    return Decomposition(m, e, k, l, horizon, [Attempt(k, l, horizon, "sat", True, cnf.n_vars,
                                                      cnf.n_clauses)], cnf, model)
