"""Conflict-driven clause-learning SAT solver.

Literals use the DIMACS convention externally (``v`` / ``-v`` for ``v >= 1``)
and ``2*v`` / ``2*v + 1`` internally.  The solver is incremental: clauses may
be added between calls and each call may pass assumption literals.

Setting ``UVLEAK_SOLVER`` to an executable switches :func:`make_solver` to
:class:`ExternalSolver`, which writes the problem in DIMACS form and reads a
SAT-competition style answer back.
"""

from __future__ import annotations

import heapq
import os
import subprocess
import tempfile
import time
from typing import Iterable, Sequence

UNASSIGNED = 0
TRUE = 1
FALSE = -1


class ResourceLimit(Exception):
    """A solve exceeded its conflict or time budget."""


def luby(i: int) -> int:
    """The ``i``-th element (1-based) of the Luby restart sequence."""
    k = 1
    while (1 << k) - 1 < i:
        k += 1
    while True:
        if i == (1 << k) - 1:
            return 1 << (k - 1)
        i = i - (1 << (k - 1)) + 1
        k = 1
        while (1 << k) - 1 < i:
            k += 1


class _Clause(list):
    """A clause is a list of internal literals; learned ones carry an LBD."""

    __slots__ = ("learnt", "lbd", "activity")

    def __init__(self, lits, learnt=False, lbd=0):
        super().__init__(lits)
        self.learnt = learnt
        self.lbd = lbd
        self.activity = 0.0


class Solver:
    def __init__(self, *, time_limit: float | None = None, conflict_limit: int | None = None):
        self.nvars = 0
        self.val: list[int] = [UNASSIGNED, UNASSIGNED]  # indexed by internal literal
        self.level: list[int] = [0]
        self.reason: list[_Clause | None] = [None]
        self.activity: list[float] = [0.0]
        self.phase: list[bool] = [False]
        self.watches: list[list[_Clause]] = [[], []]
        self.heap: list[tuple[float, int]] = []
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.qhead = 0
        self.clauses: list[_Clause] = []
        self.learnts: list[_Clause] = []
        self.var_inc = 1.0
        self.cla_inc = 1.0
        self.unsat = False  # clause set is unsatisfiable regardless of assumptions
        self.model: list[bool] | None = None
        self.time_limit = time_limit
        self.conflict_limit = conflict_limit
        self.stats = {"solves": 0, "conflicts": 0, "decisions": 0, "propagations": 0}
        self._seen: list[int] = [0]
        self.max_learnts = 2000

    # variables and clauses ---------------------------------------------

    def new_var(self) -> int:
        self.nvars += 1
        v = self.nvars
        self.val += [UNASSIGNED, UNASSIGNED]
        self.level.append(0)
        self.reason.append(None)
        self.activity.append(0.0)
        self.phase.append(False)
        self.watches += [[], []]
        self._seen.append(0)
        heapq.heappush(self.heap, (0.0, v))
        return v

    def _ensure(self, v: int) -> None:
        while self.nvars < v:
            self.new_var()

    @staticmethod
    def _lit(d: int) -> int:
        return 2 * d if d > 0 else -2 * d + 1

    def add_clause(self, lits: Iterable[int]) -> bool:
        """Add a clause of DIMACS literals.  Returns False once unsatisfiable."""
        if self.unsat:
            return False
        if self.trail_lim:
            self._cancel_until(0)
        seen: set[int] = set()
        out: list[int] = []
        for d in lits:
            if d == 0:
                raise ValueError("literal 0 is not allowed")
            self._ensure(abs(d))
            lit = self._lit(d)
            if lit ^ 1 in seen:
                return True  # tautology
            if lit in seen:
                continue
            v = self.val[lit]
            if v == TRUE:
                return True  # satisfied at level 0
            if v == FALSE:
                continue
            seen.add(lit)
            out.append(lit)
        if not out:
            self.unsat = True
            return False
        if len(out) == 1:
            self._assign(out[0], None)
            if self._propagate() is not None:
                self.unsat = True
                return False
            return True
        c = _Clause(out)
        self.clauses.append(c)
        self.watches[out[0]].append(c)
        self.watches[out[1]].append(c)
        return True

    # core -----------------------------------------------------------------

    def _assign(self, lit: int, reason: _Clause | None) -> None:
        v = lit >> 1
        self.val[lit] = TRUE
        self.val[lit ^ 1] = FALSE
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.trail.append(lit)

    def _propagate(self) -> _Clause | None:
        val = self.val
        watches = self.watches
        trail = self.trail
        props = 0
        while self.qhead < len(trail):
            p = trail[self.qhead]
            self.qhead += 1
            props += 1
            false_lit = p ^ 1
            ws = watches[false_lit]
            i = j = 0
            n = len(ws)
            while i < n:
                c = ws[i]
                i += 1
                if c[0] == false_lit:
                    c[0], c[1] = c[1], false_lit
                first = c[0]
                if val[first] == TRUE:
                    ws[j] = c
                    j += 1
                    continue
                for k in range(2, len(c)):
                    lk = c[k]
                    if val[lk] != FALSE:
                        c[1] = lk
                        c[k] = false_lit
                        watches[lk].append(c)
                        break
                else:
                    ws[j] = c
                    j += 1
                    if val[first] == FALSE:
                        while i < n:
                            ws[j] = ws[i]
                            j += 1
                            i += 1
                        del ws[j:]
                        self.stats["propagations"] += props
                        return c
                    self._assign(first, c)
            del ws[j:]
        self.stats["propagations"] += props
        return None

    def _cancel_until(self, lvl: int) -> None:
        if len(self.trail_lim) <= lvl:
            return
        start = self.trail_lim[lvl]
        val, phase, heap, act = self.val, self.phase, self.heap, self.activity
        for lit in self.trail[start:]:
            v = lit >> 1
            phase[v] = not (lit & 1)
            val[lit] = UNASSIGNED
            val[lit ^ 1] = UNASSIGNED
            self.reason[v] = None
            heapq.heappush(heap, (-act[v], v))
        del self.trail[start:]
        del self.trail_lim[lvl:]
        self.qhead = len(self.trail)

    def _bump_var(self, v: int) -> None:
        a = self.activity[v] + self.var_inc
        self.activity[v] = a
        if a > 1e100:
            self.activity = [x * 1e-100 for x in self.activity]
            self.var_inc *= 1e-100
            self.heap = [(-self.activity[u], u) for u in range(1, self.nvars + 1) if self.val[2 * u] == UNASSIGNED]
            heapq.heapify(self.heap)
        elif self.val[2 * v] == UNASSIGNED:
            heapq.heappush(self.heap, (-a, v))

    def _analyze(self, confl: _Clause) -> tuple[list[int], int]:
        seen = self._seen
        level = self.level
        cur = len(self.trail_lim)
        learnt = [0]
        pending = 0
        p = -1
        idx = len(self.trail) - 1
        touched: list[int] = []
        while True:
            if confl.learnt:
                confl.activity += self.cla_inc
            for q in confl if p == -1 else confl[1:]:
                v = q >> 1
                if not seen[v] and level[v] > 0:
                    seen[v] = 1
                    touched.append(v)
                    self._bump_var(v)
                    if level[v] >= cur:
                        pending += 1
                    else:
                        learnt.append(q)
            while not seen[self.trail[idx] >> 1]:
                idx -= 1
            p = self.trail[idx]
            idx -= 1
            confl = self.reason[p >> 1]
            seen[p >> 1] = 0
            pending -= 1
            if pending == 0:
                break
            # a reason clause always has its implied literal in position 0
        learnt[0] = p ^ 1

        # drop literals implied by other literals of the clause
        keep = [learnt[0]]
        for q in learnt[1:]:
            r = self.reason[q >> 1]
            if r is None or not all(seen[x >> 1] or level[x >> 1] == 0 for x in r if x != q ^ 1):
                keep.append(q)
        for v in touched:
            seen[v] = 0
        learnt = keep

        if len(learnt) == 1:
            back = 0
        else:
            best = max(range(1, len(learnt)), key=lambda k: level[learnt[k] >> 1])
            learnt[1], learnt[best] = learnt[best], learnt[1]
            back = level[learnt[1] >> 1]
        return learnt, back

    def _pick_branch(self) -> int | None:
        heap, val = self.heap, self.val
        while heap:
            _, v = heapq.heappop(heap)
            if val[2 * v] == UNASSIGNED:
                return 2 * v if self.phase[v] else 2 * v + 1
        return None

    def _reduce_db(self) -> None:
        locked = {id(self.reason[lit >> 1]) for lit in self.trail if self.reason[lit >> 1] is not None}
        self.learnts.sort(key=lambda c: (c.lbd, -c.activity))
        half = len(self.learnts) // 2
        keep, drop = [], set()
        for k, c in enumerate(self.learnts):
            if k >= half and c.lbd > 2 and len(c) > 2 and id(c) not in locked:
                drop.add(id(c))
            else:
                keep.append(c)
        if drop:
            for lit in range(2, 2 * self.nvars + 2):
                ws = self.watches[lit]
                if ws:
                    self.watches[lit] = [c for c in ws if id(c) not in drop]
        self.learnts = keep
        self.max_learnts = int(self.max_learnts * 1.1)

    # public -----------------------------------------------------------------

    def solve(self, assumptions: Sequence[int] = ()) -> bool:
        """True iff the clauses plus ``assumptions`` are satisfiable."""
        self.stats["solves"] += 1
        self.model = None
        if self.unsat:
            return False
        for d in assumptions:
            self._ensure(abs(d))
        self._cancel_until(0)
        if self._propagate() is not None:
            self.unsat = True
            return False
        assume = [self._lit(d) for d in assumptions]
        deadline = None if self.time_limit is None else time.monotonic() + self.time_limit
        conflicts = 0
        restart_no = 1
        budget = luby(restart_no) * 100
        while True:
            confl = self._propagate()
            if confl is not None:
                conflicts += 1
                self.stats["conflicts"] += 1
                if len(self.trail_lim) == 0:
                    self.unsat = True
                    return False
                learnt, back = self._analyze(confl)
                self._cancel_until(back)
                if len(learnt) == 1:
                    self._assign(learnt[0], None)
                else:
                    levels = {self.level[x >> 1] for x in learnt}
                    c = _Clause(learnt, learnt=True, lbd=len(levels))
                    c.activity = self.cla_inc
                    self.learnts.append(c)
                    self.watches[learnt[0]].append(c)
                    self.watches[learnt[1]].append(c)
                    self._assign(learnt[0], c)
                self.var_inc /= 0.95
                self.cla_inc /= 0.999
                if self.conflict_limit is not None and conflicts > self.conflict_limit:
                    self._cancel_until(0)
                    raise ResourceLimit(f"conflict budget of {self.conflict_limit} exhausted")
                if deadline is not None and conflicts % 64 == 0 and time.monotonic() > deadline:
                    self._cancel_until(0)
                    raise ResourceLimit(f"time budget of {self.time_limit}s exhausted")
                continue
            if conflicts >= budget:
                restart_no += 1
                budget = conflicts + luby(restart_no) * 100
                self._cancel_until(0)
                if len(self.learnts) > self.max_learnts + len(self.trail):
                    self._reduce_db()
                continue
            # assumptions occupy the first decision levels
            lvl = len(self.trail_lim)
            next_lit = None
            while lvl < len(assume):
                a = assume[lvl]
                if self.val[a] == TRUE:
                    self.trail_lim.append(len(self.trail))
                    lvl += 1
                    continue
                if self.val[a] == FALSE:
                    self._cancel_until(0)
                    return False
                next_lit = a
                break
            if next_lit is None:
                next_lit = self._pick_branch()
                if next_lit is None:
                    self.model = [False] + [self.val[2 * v] == TRUE for v in range(1, self.nvars + 1)]
                    self._cancel_until(0)
                    return True
                self.stats["decisions"] += 1
            self.trail_lim.append(len(self.trail))
            self._assign(next_lit, None)

    def value(self, d: int) -> bool:
        """Value of DIMACS literal ``d`` in the last model."""
        if self.model is None:
            raise RuntimeError("no model available")
        v = abs(d)
        b = self.model[v] if v < len(self.model) else False
        return b if d > 0 else not b


class ExternalSolver:
    """Runs an external DIMACS solver once per :meth:`solve` call."""

    def __init__(self, path: str, *, time_limit: float | None = None):
        self.path = path
        self.time_limit = time_limit
        self.nvars = 0
        self.clauses: list[list[int]] = []
        self.model: list[bool] | None = None
        self.stats = {"solves": 0}

    def new_var(self) -> int:
        self.nvars += 1
        return self.nvars

    def add_clause(self, lits: Iterable[int]) -> bool:
        c = list(lits)
        for d in c:
            self.nvars = max(self.nvars, abs(d))
        self.clauses.append(c)
        return True

    def solve(self, assumptions: Sequence[int] = ()) -> bool:
        self.stats["solves"] += 1
        self.model = None
        with tempfile.NamedTemporaryFile("w", suffix=".cnf", delete=False) as fh:
            write_dimacs(fh, self.nvars, self.clauses + [[a] for a in assumptions])
            path = fh.name
        try:
            proc = subprocess.run(
                [self.path, path], capture_output=True, text=True, timeout=self.time_limit
            )
        except subprocess.TimeoutExpired:
            raise ResourceLimit(f"external solver exceeded {self.time_limit}s") from None
        finally:
            os.unlink(path)
        status, model = parse_solver_output(proc.stdout, self.nvars)
        if status is None:
            raise RuntimeError(f"external solver gave no verdict:\n{proc.stdout}{proc.stderr}")
        self.model = model
        return status

    def value(self, d: int) -> bool:
        if self.model is None:
            raise RuntimeError("no model available")
        b = self.model[abs(d)]
        return b if d > 0 else not b


def write_dimacs(fh, nvars: int, clauses: Iterable[Sequence[int]]) -> None:
    clauses = list(clauses)
    fh.write(f"p cnf {nvars} {len(clauses)}\n")
    for c in clauses:
        fh.write(" ".join(map(str, c)) + " 0\n")


def parse_solver_output(text: str, nvars: int) -> tuple[bool | None, list[bool] | None]:
    status = None
    model = [False] * (nvars + 1)
    for line in text.splitlines():
        if line.startswith("s "):
            word = line[2:].strip()
            if word == "SATISFIABLE":
                status = True
            elif word == "UNSATISFIABLE":
                status = False
        elif line.startswith("v "):
            for tok in line[2:].split():
                d = int(tok)
                if d != 0 and abs(d) <= nvars:
                    model[abs(d)] = d > 0
    return status, (model if status else None)


def limit_from_env() -> float | None:
    raw = os.environ.get("UVLEAK_LIMIT_SECS")
    return float(raw) if raw else None


def make_solver(*, time_limit: float | None = None, conflict_limit: int | None = None):
    """The in-process solver, or an external one when ``UVLEAK_SOLVER`` is set."""
    if time_limit is None:
        time_limit = limit_from_env()
    external = os.environ.get("UVLEAK_SOLVER")
    if external:
        return ExternalSolver(external, time_limit=time_limit)
    return Solver(time_limit=time_limit, conflict_limit=conflict_limit)
