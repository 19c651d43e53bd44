"""Deterministic finite automata and the operations the synthesis needs.

States are dense integers ``0..n-1``; each carries a hashable label.  Product
automata carry one label per factor coordinate (a flat tuple) together with
the list of component names, so a predicate such as "the intruder coordinate
is the empty belief" is a lookup, not a parse.

Automata are treated as immutable values: every operation returns a fresh
object.
"""

from __future__ import annotations

import json
from collections import deque
from typing import Callable, Hashable, Iterable, Mapping, Sequence

from .events import Event, parse_event

__all__ = [
    "Automaton",
    "Belief",
    "AutomatonError",
    "sync_product",
    "observer",
    "unobservable_reach",
    "completion",
    "relabel",
    "mark_all",
    "restrict",
    "accessible_part",
    "label_str",
    "DUMP",
]

DUMP = "dump"


class AutomatonError(ValueError):
    pass


class Belief:
    """A set of states of some source automaton (possibly empty).

    Members are source-state labels kept in source index order, so two
    beliefs over the same source with the same members are equal and print
    identically.
    """

    __slots__ = ("members", "_set", "_hash")

    def __init__(self, members: Iterable[Hashable] = ()):
        self.members = tuple(members)
        self._set = frozenset(self.members)
        self._hash = hash(self._set)

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return isinstance(other, Belief) and self._set == other._set

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __contains__(self, item):
        return item in self._set

    @property
    def is_empty(self) -> bool:
        return not self.members

    def __repr__(self):
        return f"Belief({label_str(self)})"


def label_str(label) -> str:
    """Canonical text for a state label (used in JSON and DOT)."""
    if isinstance(label, Belief):
        return "{" + ",".join(label_str(m) for m in label.members) + "}"
    if isinstance(label, tuple):
        return "(" + ",".join(label_str(m) for m in label) + ")"
    return str(label)


class Automaton:
    """A deterministic automaton with a partial transition function.

    Parameters
    ----------
    labels : sequence of hashable
        One label per state; state ``i`` has label ``labels[i]``.
    alphabet : iterable of Event
    trans : sequence of mapping
        ``trans[i][event] = j``.
    initial : int
    marked : iterable of int
    name : str
    components : tuple of str, optional
        Coordinate names.  A plain automaton has the single component
        ``(name,)``; a product has one per factor and tuple labels.
    """

    __slots__ = ("name", "components", "labels", "alphabet", "trans", "initial", "marked", "_index")

    def __init__(self, labels, alphabet, trans, initial=0, marked=(), name="A", components=None):
        self.name = name
        self.components = tuple(components) if components else (name,)
        self.labels = tuple(labels)
        self.alphabet = frozenset(alphabet)
        self.trans = tuple(dict(t) for t in trans)
        self.initial = initial
        self.marked = frozenset(marked)
        self._index = None
        n = len(self.labels)
        if len(self.trans) != n:
            raise AutomatonError("one transition map per state is required")
        if not 0 <= initial < n:
            raise AutomatonError(f"initial state {initial} out of range")
        for q in self.marked:
            if not 0 <= q < n:
                raise AutomatonError(f"marked state {q} out of range")
        for q, row in enumerate(self.trans):
            for ev, dst in row.items():
                if ev not in self.alphabet:
                    raise AutomatonError(f"event {ev} at state {label_str(self.labels[q])} not in alphabet")
                if not 0 <= dst < n:
                    raise AutomatonError(f"transition target {dst} out of range")
        if len(self.components) > 1:
            for lab in self.labels:
                if not isinstance(lab, tuple) or len(lab) != len(self.components):
                    raise AutomatonError("product labels must match the component list")

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_edges(cls, states: Sequence[Hashable], alphabet, edges, initial, marked=None, name="A"):
        """Build from labels and ``(src_label, event, dst_label)`` triples.

        ``marked=None`` marks every state.
        """
        states = list(states)
        index = {s: i for i, s in enumerate(states)}
        if len(index) != len(states):
            raise AutomatonError("duplicate state labels")
        trans = [dict() for _ in states]
        for src, ev, dst in edges:
            if src not in index or dst not in index:
                raise AutomatonError(f"edge {src!r} -{ev}-> {dst!r} uses an unknown state")
            row = trans[index[src]]
            if ev in row and row[ev] != index[dst]:
                raise AutomatonError(f"nondeterministic edges on {ev} from {label_str(src)}")
            row[ev] = index[dst]
        if marked is None:
            marked_idx = range(len(states))
        else:
            marked_idx = [index[m] for m in marked]
        if initial not in index:
            raise AutomatonError(f"initial state {initial!r} unknown")
        return cls(states, alphabet, trans, index[initial], marked_idx, name=name)

    # -- basic queries ---------------------------------------------------------

    @property
    def n_states(self) -> int:
        return len(self.labels)

    def __len__(self):
        return len(self.labels)

    def index_of(self, label) -> int:
        if self._index is None:
            self._index = {lab: i for i, lab in enumerate(self.labels)}
        return self._index[label]

    def has_state(self, label) -> bool:
        try:
            self.index_of(label)
        except KeyError:
            return False
        return True

    def step(self, q: int, ev: Event):
        return self.trans[q].get(ev)

    def run(self, word: Iterable[Event], start: int | None = None):
        """State reached by ``word`` or None if it leaves the language."""
        q = self.initial if start is None else start
        for ev in word:
            q = self.trans[q].get(ev)
            if q is None:
                return None
        return q

    def accepts(self, word) -> bool:
        """Closed-behaviour membership."""
        return self.run(word) is not None

    def edges(self):
        for q, row in enumerate(self.trans):
            for ev, dst in row.items():
                yield q, ev, dst

    @property
    def n_transitions(self) -> int:
        return sum(len(row) for row in self.trans)

    def coordinate(self, q: int, component: str):
        """Label of ``component``'s factor in product state ``q``."""
        if len(self.components) == 1:
            if component != self.components[0]:
                raise KeyError(component)
            return self.labels[q]
        return self.labels[q][self.components.index(component)]

    def is_deterministic(self) -> bool:
        # dict rows make nondeterminism unrepresentable; kept for callers
        # that check it explicitly after construction
        return all(isinstance(row, dict) for row in self.trans)

    def is_total(self) -> bool:
        return all(len(row) == len(self.alphabet) for row in self.trans)

    # -- reachability ----------------------------------------------------------

    def accessible_states(self) -> set[int]:
        seen = {self.initial}
        stack = [self.initial]
        while stack:
            q = stack.pop()
            for dst in self.trans[q].values():
                if dst not in seen:
                    seen.add(dst)
                    stack.append(dst)
        return seen

    def coaccessible_states(self) -> set[int]:
        pred: list[list[int]] = [[] for _ in self.labels]
        for q, row in enumerate(self.trans):
            for dst in row.values():
                pred[dst].append(q)
        seen = set(self.marked)
        stack = list(self.marked)
        while stack:
            q = stack.pop()
            for p in pred[q]:
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        return seen

    def is_nonblocking(self) -> bool:
        acc = self.accessible_states()
        return acc <= self.coaccessible_states()

    def is_marker_reachable(self) -> bool:
        return bool(self.accessible_states() & self.marked)

    def is_accessible(self) -> bool:
        return len(self.accessible_states()) == self.n_states

    def shortest_path(self, target: Callable[[int], bool]):
        """BFS word from the initial state to the first state satisfying
        ``target``; ties broken by canonical event order.  None if unreachable."""
        parent = {self.initial: None}
        queue = deque([self.initial])
        while queue:
            q = queue.popleft()
            if target(q):
                word = []
                while parent[q] is not None:
                    q, ev = parent[q]
                    word.append(ev)
                return word[::-1]
            for ev in sorted(self.trans[q]):
                dst = self.trans[q][ev]
                if dst not in parent:
                    parent[dst] = (q, ev)
                    queue.append(dst)
        return None

    # -- serialization ---------------------------------------------------------

    def state_names(self) -> list[str]:
        names = [label_str(lab) for lab in self.labels]
        if len(set(names)) != len(names):
            # labels printing alike (e.g. 1 and "1") get a numeric suffix
            seen: dict[str, int] = {}
            out = []
            for nm in names:
                k = seen.get(nm, 0)
                seen[nm] = k + 1
                out.append(nm if k == 0 else f"{nm}~{k}")
            names = out
        return names

    def to_dict(self) -> dict:
        names = self.state_names()
        return {
            "name": self.name,
            "states": names,
            "alphabet": sorted(str(e) for e in self.alphabet),
            "initial": names[self.initial],
            "marked": [names[q] for q in sorted(self.marked)],
            "transitions": [[names[q], str(ev), names[d]] for q in range(self.n_states)
                            for ev, d in sorted(self.trans[q].items())],
        }

    def to_json(self, indent=1) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, doc: Mapping) -> "Automaton":
        try:
            states = list(doc["states"])
            alphabet = [parse_event(e) for e in doc["alphabet"]]
            edges = [(s, parse_event(e), d) for s, e, d in doc["transitions"]]
            return cls.from_edges(states, alphabet, edges, doc["initial"], list(doc.get("marked", [])),
                                  name=doc.get("name", "A"))
        except (KeyError, TypeError) as exc:
            raise AutomatonError(f"malformed automaton document: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "Automaton":
        return cls.from_dict(json.loads(text))

    def to_dot(self, hide_selfloops: Iterable[Event] = ()) -> str:
        """GraphViz source; parallel edges are merged into one label."""
        hide = set(hide_selfloops)
        names = self.state_names()
        lines = [f'digraph "{self.name}" {{', "  rankdir=LR;", '  __start [shape=point, label=""];']
        for q, nm in enumerate(names):
            shape = "doublecircle" if q in self.marked else "circle"
            lines.append(f'  q{q} [shape={shape}, label="{_dot_escape(nm)}"];')
        lines.append(f"  __start -> q{self.initial};")
        for q in range(self.n_states):
            grouped: dict[int, list[str]] = {}
            for ev, d in sorted(self.trans[q].items()):
                if d == q and ev in hide:
                    continue
                grouped.setdefault(d, []).append(str(ev))
            for d, evs in grouped.items():
                lines.append(f'  q{q} -> q{d} [label="{_dot_escape(", ".join(evs))}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"

    def __repr__(self):
        return f"<Automaton {self.name}: {self.n_states} states, {self.n_transitions} transitions>"

    def structurally_equal(self, other: "Automaton") -> bool:
        return self.to_dict() | {"name": None} == other.to_dict() | {"name": None}


def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


# -- operations -----------------------------------------------------------------


def sync_product(factors: Sequence[Automaton], name: str | None = None) -> Automaton:
    """Synchronous product, accessible part only.

    Shared events move every factor that owns them; private events move
    their owner alone.  A product state is marked iff every coordinate is.
    Labels of factors that are themselves products are spliced in, so the
    result's components are the concatenation of the factors' components.
    """
    factors = list(factors)
    if not factors:
        raise AutomatonError("sync_product needs at least one factor")
    alphabet = frozenset().union(*(f.alphabet for f in factors))
    owners: dict[Event, tuple[int, ...]] = {
        ev: tuple(i for i, f in enumerate(factors) if ev in f.alphabet) for ev in alphabet
    }
    # each event is scanned from its first owner's enabled set only
    first_owned = [
        {ev for ev in f.alphabet if owners[ev][0] == i} for i, f in enumerate(factors)
    ]
    rest_owners = {ev: own[1:] for ev, own in owners.items()}
    trans_f = [f.trans for f in factors]
    marked_f = [f.marked for f in factors]
    splice = [len(f.components) > 1 for f in factors]
    components: list[str] = []
    for f in factors:
        components.extend(f.components)

    init = tuple(f.initial for f in factors)
    index = {init: 0}
    order = [init]
    trans: list[dict] = []
    k = len(factors)
    i = 0
    while i < len(order):
        tup = order[i]
        i += 1
        row = {}
        for fi in range(k):
            frow = trans_f[fi][tup[fi]]
            mine = first_owned[fi]
            for ev, dst in frow.items():
                if ev not in mine:
                    continue
                nxt = list(tup)
                nxt[fi] = dst
                ok = True
                for oj in rest_owners[ev]:
                    d2 = trans_f[oj][tup[oj]].get(ev)
                    if d2 is None:
                        ok = False
                        break
                    nxt[oj] = d2
                if not ok:
                    continue
                nt = tuple(nxt)
                j = index.get(nt)
                if j is None:
                    j = len(order)
                    index[nt] = j
                    order.append(nt)
                row[ev] = j
        trans.append(row)

    def make_label(tup):
        out = []
        for fi, q in enumerate(tup):
            lab = factors[fi].labels[q]
            if splice[fi]:
                out.extend(lab)
            else:
                out.append(lab)
        return tuple(out)

    labels = [make_label(t) for t in order]
    marked = [j for j, t in enumerate(order) if all(t[fi] in marked_f[fi] for fi in range(k))]
    nm = name or "||".join(f.name for f in factors)
    if len(components) == 1:
        labels = [lab[0] for lab in labels]
    return Automaton(labels, alphabet, trans, 0, marked, name=nm, components=components)


def unobservable_reach(aut: Automaton, seeds: Iterable[int], observable) -> frozenset:
    """States reachable from ``seeds`` through events outside ``observable``."""
    seen = set(seeds)
    stack = list(seen)
    trans = aut.trans
    while stack:
        q = stack.pop()
        for ev, dst in trans[q].items():
            if ev not in observable and dst not in seen:
                seen.add(dst)
                stack.append(dst)
    return frozenset(seen)


def observer(aut: Automaton, observable, totalize: bool = False, name: str | None = None,
             max_states: int | None = None) -> Automaton:
    """Subset construction over the whole alphabet of ``aut``.

    Observable events move between unobservable-reach closed beliefs;
    unobservable events self-loop at every nonempty belief.  With
    ``totalize`` every observable event is defined at every nonempty belief,
    going to the empty belief when no member enables it; the empty belief
    itself gets no transitions here.
    """
    observable = frozenset(observable)
    if not observable <= aut.alphabet:
        extra = sorted(str(e) for e in observable - aut.alphabet)
        raise AutomatonError(f"observable events not in alphabet: {extra}")
    unobs = sorted(aut.alphabet - observable)
    obs_sorted = sorted(observable)
    trans = aut.trans
    # per-state observable successors, to avoid scanning the full alphabet
    obs_rows = [{ev: d for ev, d in row.items() if ev in observable} for row in trans]
    unobs_rows = [[d for ev, d in row.items() if ev not in observable] for row in trans]

    def closure(seeds):
        seen = set(seeds)
        stack = list(seen)
        while stack:
            q = stack.pop()
            for d in unobs_rows[q]:
                if d not in seen:
                    seen.add(d)
                    stack.append(d)
        return frozenset(seen)

    init = closure([aut.initial])
    index = {init: 0}
    order = [init]
    rows: list[dict] = []
    empty = frozenset()
    i = 0
    while i < len(order):
        b = order[i]
        i += 1
        row: dict = {}
        if b:
            images: dict = {}
            for q in b:
                for ev, d in obs_rows[q].items():
                    images.setdefault(ev, set()).add(d)
            for ev in obs_sorted:
                img = images.get(ev)
                if img is None:
                    if not totalize:
                        continue
                    tgt = empty
                else:
                    tgt = closure(img)
                j = index.get(tgt)
                if j is None:
                    j = len(order)
                    index[tgt] = j
                    order.append(tgt)
                    if max_states is not None and len(order) > max_states:
                        raise StateBudgetExceeded(f"observer exceeded {max_states} states")
                row[ev] = j
            for ev in unobs:
                row[ev] = i - 1
        rows.append(row)

    labels = [Belief(aut.labels[q] for q in sorted(b)) for b in order]
    return Automaton(labels, aut.alphabet, rows, 0, range(len(order)), name=name or f"Obs({aut.name})")


class StateBudgetExceeded(RuntimeError):
    pass


def completion(aut: Automaton, dump_label=DUMP) -> Automaton:
    """Total automaton with one extra unmarked dump state at index n."""
    n = aut.n_states
    if dump_label in set(aut.labels):
        raise AutomatonError(f"dump label {dump_label!r} clashes with an existing state")
    if len(aut.components) > 1:
        dump_label = tuple([dump_label] * len(aut.components))
    evs = sorted(aut.alphabet)
    rows = []
    for row in aut.trans:
        new = dict(row)
        for ev in evs:
            if ev not in new:
                new[ev] = n
        rows.append(new)
    rows.append({ev: n for ev in evs})
    return Automaton(list(aut.labels) + [dump_label], aut.alphabet, rows, aut.initial, aut.marked,
                     name=f"{aut.name}_bar", components=aut.components)


def relabel(aut: Automaton, mapping: Mapping[Event, Event], name: str | None = None) -> Automaton:
    """Rename events; events missing from ``mapping`` keep their name."""
    full = {ev: mapping.get(ev, ev) for ev in aut.alphabet}
    if len(set(full.values())) != len(full):
        raise AutomatonError("relabel map is not injective on the alphabet")
    rows = [{full[ev]: d for ev, d in row.items()} for row in aut.trans]
    return Automaton(aut.labels, full.values(), rows, aut.initial, aut.marked,
                     name=name or aut.name, components=aut.components)


def mark_all(aut: Automaton) -> Automaton:
    return Automaton(aut.labels, aut.alphabet, aut.trans, aut.initial, range(aut.n_states),
                     name=aut.name, components=aut.components)


def restrict(aut: Automaton, keep: Iterable[int], name: str | None = None) -> Automaton:
    """Subautomaton on ``keep`` (state indices), then its accessible part.

    Raises if the initial state is not kept.
    """
    keep = set(keep)
    if not keep <= set(range(aut.n_states)):
        raise AutomatonError("restrict: keep contains unknown states")
    if aut.initial not in keep:
        raise AutomatonError("restrict: the initial state was removed")
    return _sub(aut, keep, name or aut.name)


def accessible_part(aut: Automaton) -> Automaton:
    return _sub(aut, set(range(aut.n_states)), aut.name)


def _sub(aut: Automaton, keep: set, name: str) -> Automaton:
    order = [aut.initial]
    index = {aut.initial: 0}
    i = 0
    while i < len(order):
        q = order[i]
        i += 1
        for ev, d in sorted(aut.trans[q].items()):
            if d in keep and d not in index:
                index[d] = len(order)
                order.append(d)
    order_sorted = sorted(order)
    # keep original relative order for canonical output
    remap = {q: j for j, q in enumerate(order_sorted)}
    if aut.initial != order_sorted[0]:
        # initial first keeps index 0 convention for derived automata
        order_sorted.remove(aut.initial)
        order_sorted.insert(0, aut.initial)
        remap = {q: j for j, q in enumerate(order_sorted)}
    rows = []
    for q in order_sorted:
        rows.append({ev: remap[d] for ev, d in aut.trans[q].items() if d in remap})
    return Automaton([aut.labels[q] for q in order_sorted], aut.alphabet, rows, 0,
                     [remap[q] for q in order_sorted if q in aut.marked], name=name,
                     components=aut.components)
