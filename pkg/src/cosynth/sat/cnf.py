"""CNF container with named variable blocks, DIMACS and model-file I/O."""

from __future__ import annotations

import itertools
import json
import re
from array import array
from dataclasses import dataclass, field

__all__ = [
    "VarBlock",
    "SparseBlock",
    "CnfInstance",
    "SatModel",
    "ModelFileError",
    "read_dimacs",
    "read_model",
]


class ModelFileError(ValueError):
    pass


@dataclass
class VarBlock:
    """A dense rectangular family of variables, e.g. ``tM[i,event,j]``.

    ``dims`` holds one label list per index position; the id of
    ``(a, b, c)`` is ``base + ((a * len1) + b) * len2 + c``.
    """

    name: str
    base: int
    dims: tuple

    def __post_init__(self):
        self.shape = tuple(len(d) for d in self.dims)
        size = 1
        for s in self.shape:
            size *= s
        self.size = size
        strides = []
        acc = 1
        for s in reversed(self.shape):
            strides.append(acc)
            acc *= s
        self.strides = tuple(reversed(strides))

    def id(self, *idx) -> int:
        off = 0
        for i, st in zip(idx, self.strides):
            off += i * st
        return self.base + off

    def names(self):
        for n, combo in enumerate(itertools.product(*self.dims)):
            yield f"{self.name}[{','.join(str(c) for c in combo)}]", self.base + n

    def decode(self, var: int) -> tuple:
        off = var - self.base
        out = []
        for st in self.strides:
            out.append(off // st)
            off %= st
        return tuple(out)


@dataclass
class SparseBlock:
    """Variables allocated one at a time with a key tuple (Tseitin auxiliaries)."""

    name: str
    keys: list = field(default_factory=list)
    ids: array = field(default_factory=lambda: array("i"))

    @property
    def size(self) -> int:
        return len(self.ids)

    def names(self):
        for key, v in zip(self.keys, self.ids):
            yield f"{self.name}[{','.join(str(c) for c in key)}]", v


class CnfInstance:
    """Clauses over dense variable ids ``1..n_vars``.

    Clauses live in one flat ``array('i')`` with zero terminators, as in
    DIMACS, so million-clause encodings stay compact.
    """

    def __init__(self):
        self.n_vars = 0
        self.n_clauses = 0
        self.lits = array("i")
        self.blocks: dict[str, VarBlock | SparseBlock] = {}
        self.meta: dict = {}
        self.empty_clause = False

    # -- variables -----------------------------------------------------------

    def block(self, name: str, *dims) -> VarBlock:
        if name in self.blocks:
            raise ValueError(f"duplicate variable block {name}")
        blk = VarBlock(name, self.n_vars + 1, tuple(list(d) for d in dims))
        self.n_vars += blk.size
        self.blocks[name] = blk
        return blk

    def sparse(self, name: str) -> SparseBlock:
        if name in self.blocks:
            raise ValueError(f"duplicate variable block {name}")
        blk = SparseBlock(name)
        self.blocks[name] = blk
        return blk

    def new_var(self, block: SparseBlock, key) -> int:
        self.n_vars += 1
        block.keys.append(key)
        block.ids.append(self.n_vars)
        return self.n_vars

    def block_size(self, name: str) -> int:
        return self.blocks[name].size

    def variable_map(self) -> dict[str, int]:
        out = {}
        for blk in self.blocks.values():
            for nm, v in blk.names():
                out[nm] = v
        return out

    # -- clauses -------------------------------------------------------------

    def add(self, clause) -> None:
        if not clause:
            self.empty_clause = True
        self.lits.extend(clause)
        self.lits.append(0)
        self.n_clauses += 1

    def clauses(self):
        cur = []
        for x in self.lits:
            if x == 0:
                yield cur
                cur = []
            else:
                cur.append(x)

    def check_ids(self) -> bool:
        n = self.n_vars
        return all(x == 0 or 1 <= abs(x) <= n for x in self.lits)

    def evaluate(self, model: "SatModel") -> bool:
        val = model.values
        ok = False
        for x in self.lits:
            if x == 0:
                if not ok:
                    return False
                ok = False
            elif not ok and (val[x] if x > 0 else not val[-x]):
                ok = True
        return True

    # -- DIMACS --------------------------------------------------------------

    def to_dimacs(self) -> str:
        parts = [f"p cnf {self.n_vars} {self.n_clauses}\n"]
        cur: list[str] = []
        for x in self.lits:
            cur.append(str(x))
            if x == 0:
                parts.append(" ".join(cur) + "\n")
                cur = []
        return "".join(parts)

    def write_dimacs(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_dimacs())

    def write_variable_map(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.variable_map(), fh, indent=0, sort_keys=False)


@dataclass
class SatModel:
    """Total assignment; ``values[v]`` for ``v`` in ``1..n`` (index 0 unused)."""

    values: list

    @classmethod
    def from_literals(cls, lits, n_vars: int) -> "SatModel":
        vals = [False] * (n_vars + 1)
        for x in lits:
            if x == 0:
                continue
            v = abs(x)
            if v > n_vars:
                raise ModelFileError(f"literal {x} exceeds the {n_vars} declared variables")
            vals[v] = x > 0
        return cls(vals)

    def __getitem__(self, v: int) -> bool:
        return self.values[v]

    @property
    def n_vars(self) -> int:
        return len(self.values) - 1

    def literals(self) -> list[int]:
        return [v if self.values[v] else -v for v in range(1, len(self.values))]

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(" ".join(str(x) for x in self.literals()) + " 0\n")


_INT = re.compile(r"^-?\d+$")


def read_model(path_or_text, n_vars: int) -> SatModel:
    """Parse a model: whitespace-separated signed integers, optionally in
    solver-output form (``s SATISFIABLE`` and ``v ...`` lines)."""
    text = str(path_or_text)
    try:
        with open(text) as fh:
            text = fh.read()
    except (FileNotFoundError, OSError):
        pass
    lits = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("s "):
            if "UNSAT" in line.upper():
                raise ModelFileError("model file reports UNSATISFIABLE")
            continue
        if line.startswith("v"):
            line = line[1:]
        for tok in line.split():
            if not _INT.match(tok):
                raise ModelFileError(f"malformed token {tok!r} in model file")
            lits.append(int(tok))
    if not lits:
        raise ModelFileError("model file contains no literals")
    seen = {abs(x) for x in lits if x}
    missing = n_vars - len(seen & set(range(1, n_vars + 1)))
    if missing:
        raise ModelFileError(f"model assigns {n_vars - missing} of {n_vars} variables")
    return SatModel.from_literals(lits, n_vars)


def read_dimacs(text: str) -> CnfInstance:
    cnf = CnfInstance()
    declared = None
    cur: list[int] = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise ValueError(f"bad DIMACS header {line!r}")
            declared = (int(parts[2]), int(parts[3]))
            continue
        for tok in line.split():
            x = int(tok)
            if x == 0:
                cnf.add(cur)
                cur = []
            else:
                cur.append(x)
    if cur:
        cnf.add(cur)
    if declared is None:
        raise ValueError("missing DIMACS header")
    cnf.n_vars = declared[0]
    return cnf
