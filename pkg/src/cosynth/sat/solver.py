"""SAT solving: an embedded CDCL solver and an optional pysat backend.

``solve`` returns a :class:`~cosynth.sat.cnf.SatModel` or :data:`UNSAT`.
The embedded solver is a conventional conflict-driven clause-learning
procedure (two watched literals, first-UIP learning, VSIDS-style activity,
Luby restarts, phase saving).  It is complete, and deterministic for a
fixed seed.
"""

from __future__ import annotations

import heapq
import importlib.util
import time

from .cnf import CnfInstance, SatModel

__all__ = ["UNSAT", "Unsat", "SolverTimeout", "solve", "solve_clauses", "available_backends",
           "CdclSolver"]


class Unsat:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNSAT"

    def __bool__(self):
        return False


UNSAT = Unsat()


class SolverTimeout(RuntimeError):
    pass


def _luby(i: int) -> int:
    # 1,1,2,1,1,2,4,1,1,2,1,1,2,4,8,...
    size, seq = 1, 0
    while size < i + 1:
        seq += 1
        size = 2 * size + 1
    while size - 1 != i:
        size = (size - 1) >> 1
        seq -= 1
        i = i % size
    return 1 << seq


class CdclSolver:
    def __init__(self, n_vars: int, clauses, seed: int = 0):
        self.n = n_vars
        n = n_vars
        self.assign = [0] * (n + 1)       # 1 true, -1 false, 0 free
        self.level = [0] * (n + 1)
        self.reason: list = [None] * (n + 1)
        self.phase = [-1] * (n + 1)
        self.activity = [0.0] * (n + 1)
        self.bump = 1.0
        self.watches: list[list] = [[] for _ in range(2 * n + 1)]
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.qhead = 0
        self.ok = True
        self.units: list[int] = []
        # small deterministic perturbation so ties do not depend on id order only
        if seed:
            import random
            rng = random.Random(seed)
            for v in range(1, n + 1):
                self.activity[v] = rng.random() * 1e-3
        self.heap = [(-self.activity[v], v) for v in range(1, n + 1)]
        heapq.heapify(self.heap)
        for c in clauses:
            self._add_input(list(c))

    # -- construction --------------------------------------------------------

    def _add_input(self, c):
        if not self.ok:
            return
        seen = set()
        out = []
        for x in c:
            if -x in seen:
                return  # tautology
            if x not in seen:
                seen.add(x)
                out.append(x)
        if not out:
            self.ok = False
            return
        if len(out) == 1:
            self.units.append(out[0])
            return
        self.watches[out[0] + self.n].append(out)
        self.watches[out[1] + self.n].append(out)

    def value(self, x: int) -> int:
        a = self.assign[x if x > 0 else -x]
        return a if x > 0 else -a

    def _enqueue(self, x: int, reason) -> None:
        v = x if x > 0 else -x
        self.assign[v] = 1 if x > 0 else -1
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.trail.append(x)

    # -- propagation ---------------------------------------------------------

    def propagate(self):
        assign = self.assign
        watches = self.watches
        n = self.n
        trail = self.trail
        while self.qhead < len(trail):
            p = trail[self.qhead]
            self.qhead += 1
            false_lit = -p
            ws = watches[false_lit + n]
            i = j = 0
            end = len(ws)
            while i < end:
                c = ws[i]
                i += 1
                if c[0] == false_lit:
                    c[0], c[1] = c[1], c[0]
                first = c[0]
                fv = assign[first] if first > 0 else -assign[-first]
                if fv == 1:
                    ws[j] = c
                    j += 1
                    continue
                found = False
                for k in range(2, len(c)):
                    lk = c[k]
                    lv = assign[lk] if lk > 0 else -assign[-lk]
                    if lv != -1:
                        c[1], c[k] = lk, false_lit
                        watches[lk + n].append(c)
                        found = True
                        break
                if found:
                    continue
                ws[j] = c
                j += 1
                if fv == -1:
                    while i < end:
                        ws[j] = ws[i]
                        j += 1
                        i += 1
                    del ws[j:]
                    self.qhead = len(trail)
                    return c
                self._enqueue(first, c)
            del ws[j:]
        return None

    # -- conflict analysis ---------------------------------------------------

    def _bump_var(self, v):
        self.activity[v] += self.bump
        if self.activity[v] > 1e100:
            for u in range(1, self.n + 1):
                self.activity[u] *= 1e-100
            self.bump *= 1e-100
            self.heap = [(-self.activity[u], u) for u in range(1, self.n + 1) if self.assign[u] == 0]
            heapq.heapify(self.heap)
        elif self.assign[v] == 0:
            heapq.heappush(self.heap, (-self.activity[v], v))

    def analyze(self, confl):
        seen = {}
        learnt = [0]
        counter = 0
        p = None
        idx = len(self.trail) - 1
        cur_level = len(self.trail_lim)
        clause = confl
        while True:
            for q in clause:
                if p is not None and q == p:
                    continue
                v = q if q > 0 else -q
                if v not in seen and self.level[v] > 0:
                    seen[v] = True
                    self._bump_var(v)
                    if self.level[v] >= cur_level:
                        counter += 1
                    else:
                        learnt.append(q)
            while True:
                p = self.trail[idx]
                idx -= 1
                if (p if p > 0 else -p) in seen:
                    break
            counter -= 1
            v = p if p > 0 else -p
            clause = self.reason[v]
            if counter == 0:
                break
        learnt[0] = -p
        # minimisation: drop literals implied by others in the clause
        if len(learnt) > 2:
            keep = [learnt[0]]
            marks = {abs(x) for x in learnt}
            for x in learnt[1:]:
                r = self.reason[abs(x)]
                if r is None or any(abs(y) not in marks and self.level[abs(y)] > 0 for y in r if y != -x):
                    keep.append(x)
            learnt = keep
        if len(learnt) == 1:
            back = 0
        else:
            best = 1
            for k in range(2, len(learnt)):
                if self.level[abs(learnt[k])] > self.level[abs(learnt[best])]:
                    best = k
            learnt[1], learnt[best] = learnt[best], learnt[1]
            back = self.level[abs(learnt[1])]
        self.bump /= 0.95
        return learnt, back

    def backtrack(self, lvl: int):
        if len(self.trail_lim) <= lvl:
            return
        stop = self.trail_lim[lvl]
        for k in range(len(self.trail) - 1, stop - 1, -1):
            x = self.trail[k]
            v = x if x > 0 else -x
            self.phase[v] = self.assign[v]
            self.assign[v] = 0
            self.reason[v] = None
            heapq.heappush(self.heap, (-self.activity[v], v))
        del self.trail[stop:]
        del self.trail_lim[lvl:]
        self.qhead = len(self.trail)

    def _pick(self):
        heap = self.heap
        assign = self.assign
        while heap:
            _, v = heapq.heappop(heap)
            if assign[v] == 0:
                return v
        for v in range(1, self.n + 1):
            if assign[v] == 0:
                return v
        return None

    # -- main loop -----------------------------------------------------------

    def solve(self, timeout: float | None = None):
        if not self.ok:
            return UNSAT
        for x in self.units:
            val = self.value(x)
            if val == -1:
                return UNSAT
            if val == 0:
                self._enqueue(x, None)
        if self.propagate() is not None:
            return UNSAT
        deadline = None if timeout is None else time.monotonic() + timeout
        conflicts = 0
        restart_no = 0
        limit = 100 * _luby(restart_no)
        since_restart = 0
        while True:
            confl = self.propagate()
            if confl is not None:
                conflicts += 1
                since_restart += 1
                if not self.trail_lim:
                    return UNSAT
                learnt, back = self.analyze(confl)
                self.backtrack(back)
                if len(learnt) == 1:
                    self._enqueue(learnt[0], None)
                else:
                    self.watches[learnt[0] + self.n].append(learnt)
                    self.watches[learnt[1] + self.n].append(learnt)
                    self._enqueue(learnt[0], learnt)
                if deadline is not None and conflicts % 64 == 0 and time.monotonic() > deadline:
                    raise SolverTimeout(f"embedded solver exceeded {timeout} s")
                continue
            if since_restart >= limit:
                restart_no += 1
                limit = 100 * _luby(restart_no)
                since_restart = 0
                self.backtrack(0)
                continue
            v = self._pick()
            if v is None:
                return SatModel([False] + [a == 1 for a in self.assign[1:]])
            self.trail_lim.append(len(self.trail))
            self._enqueue(v if self.phase[v] == 1 else -v, None)


def _pysat_available() -> bool:
    try:
        return importlib.util.find_spec("pysat.solvers") is not None
    except ImportError:
        return False


def available_backends() -> list[str]:
    out = ["cdcl"]
    if _pysat_available():
        out.append("pysat")
    return out


def solve_clauses(n_vars: int, clauses, backend: str = "auto", timeout: float | None = None,
                  seed: int = 0):
    """Solve an explicit clause list (lists of non-zero ints)."""
    cnf = CnfInstance()
    cnf.n_vars = n_vars
    for c in clauses:
        cnf.add(c)
    return solve(cnf, backend=backend, timeout=timeout, seed=seed)


def solve(cnf: CnfInstance, backend: str = "auto", timeout: float | None = None, seed: int = 0,
          extra_clauses=()):
    """Decide ``cnf`` (plus ``extra_clauses``).

    ``backend`` is ``"cdcl"`` (embedded), ``"pysat"`` or ``"auto"``
    (pysat when installed, otherwise the embedded solver).
    """
    if backend == "auto":
        backend = "pysat" if _pysat_available() else "cdcl"
    if cnf.empty_clause:
        return UNSAT
    if backend == "cdcl":
        clauses = list(cnf.clauses())
        clauses.extend(list(c) for c in extra_clauses)
        solver = CdclSolver(cnf.n_vars, clauses, seed=seed)
        result = solver.solve(timeout)
    elif backend == "pysat":
        result = _solve_pysat(cnf, timeout, extra_clauses)
    else:
        raise ValueError(f"unknown SAT backend {backend!r}")
    if result is not UNSAT and not cnf.evaluate(result):
        raise AssertionError("SAT backend returned an assignment that violates the formula")
    return result


def _solve_pysat(cnf: CnfInstance, timeout, extra_clauses):
    import threading

    from pysat.solvers import Solver

    with Solver(name="cadical153") as s:
        lits = cnf.lits
        cur: list[int] = []
        for x in lits:
            if x == 0:
                s.add_clause(cur)
                cur = []
            else:
                cur.append(x)
        for c in extra_clauses:
            s.add_clause(list(c))
        if timeout is None:
            sat = s.solve()
        else:
            timer = threading.Timer(timeout, s.interrupt)
            timer.start()
            try:
                sat = s.solve_limited(expect_interrupt=True)
            finally:
                timer.cancel()
            if sat is None:
                raise SolverTimeout(f"pysat exceeded {timeout} s")
        if not sat:
            return UNSAT
        model = s.get_model() or []
        return SatModel.from_literals(model, cnf.n_vars)
