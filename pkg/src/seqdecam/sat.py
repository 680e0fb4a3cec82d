"""Incremental SAT solving for CnfInstances.

Two backends share one interface: an embedded CDCL solver (watched
literals, first-UIP learning, VSIDS, phase saving, Luby restarts,
solve-under-assumptions) and an external process that accepts DIMACS on a
file argument and prints a model on stdout.  Every SAT answer is verified
against the clause database before it is returned.

Run ``python -m seqdecam.sat file.cnf`` to use the embedded solver as a
DIMACS command-line solver (this doubles as the external backend in tests).
"""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass, field
from heapq import heappop, heappush
from typing import Iterable, Sequence

from .cnf import CnfInstance

SAT = "SAT"
UNSAT = "UNSAT"
TIMEOUT = "TIMEOUT"

_VAR_DECAY = 0.95
_RESTART_BASE = 100
_CLAUSE_DECAY = 0.999


@dataclass
class SolveStats:
    conflicts: int = 0
    decisions: int = 0
    propagations: int = 0
    wall_time: float = 0.0


@dataclass
class SolveResult:
    """Outcome of one solver call.

    ``model`` maps group names of the instance to bit tuples and is present
    iff status is SAT.  ``raw_model`` maps variable index to bool.
    """

    status: str
    model: dict[str, tuple[int, ...]] | None = None
    raw_model: list[bool] | None = None
    stats: SolveStats = field(default_factory=SolveStats)

    def lit_value(self, lit: int) -> int:
        # in CnfBuilder instances variable 1 is pinned true, so the literals
        # +1/-1 resolve to the constants through the model itself
        v = self.raw_model[abs(lit)]
        return int(v if lit > 0 else not v)

    def bits(self, lits: Sequence[int]) -> tuple[int, ...]:
        return tuple(self.lit_value(l) for l in lits)


class MalformedInstanceError(ValueError):
    pass


class ModelVerificationError(RuntimeError):
    pass


def _luby(i: int) -> int:
    # Luby restart sequence 1 1 2 1 1 2 4 ...
    k = 1
    while (1 << (k + 1)) <= i + 1:
        k += 1
    while (1 << k) - 1 != i + 1:
        i = i - (1 << k) + 1
        k = 1
        while (1 << (k + 1)) <= i + 1:
            k += 1
    return 1 << k


class Cdcl:
    """Embedded conflict-driven clause-learning solver.

    Variables are 1-based; clause literals are signed ints.  Internally a
    literal is encoded as 2v (positive) or 2v+1 (negative).
    """

    def __init__(self):
        self.ok = True
        self.nvars = 0
        self.val = bytearray(2)  # indexed by encoded literal: 0 undef 1 true 2 false
        self.watches: list[list] = [[], []]
        self.bwatch: list[list[int]] = [[], []]
        self.level = [0]
        self.reason: list = [None]
        self.activity = [0.0]
        self.polarity = bytearray(1)
        self.branchable = bytearray(1)  # 0 = implied definition, skip in decisions
        self.seen = bytearray(1)
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.qhead = 0
        self.heap: list[tuple[float, int]] = []
        self.var_inc = 1.0
        self.clauses: list[list[int]] = []
        self.learnts: list[list[int]] = []
        self.cla_act: dict[int, float] = {}
        self.cla_lbd: dict[int, int] = {}
        self.cla_inc = 1.0
        self.stats = SolveStats()
        self.model: list[bool] = []

    # --------------------------------------------------------- construction

    def ensure_vars(self, n: int) -> None:
        while self.nvars < n:
            self.nvars += 1
            self.val.extend(b"\x00\x00")
            self.watches.append([])
            self.watches.append([])
            self.bwatch.append([])
            self.bwatch.append([])
            self.level.append(0)
            self.reason.append(None)
            self.activity.append(0.0)
            self.polarity.append(0)
            self.branchable.append(1)
            self.seen.append(0)
            heappush(self.heap, (0.0, self.nvars))

    def mark_implied(self, vars_: Iterable[int]) -> None:
        """These variables are definitions; decisions never pick them.

        Completeness is kept by the fallback scan in _pick_branch: if
        propagation ever leaves one unassigned, it still gets decided.
        """
        for v in vars_:
            if v <= self.nvars:
                self.branchable[v] = 0

    def add_clause(self, lits: Sequence[int]) -> None:
        """Add a problem clause; must be called with the trail at level 0."""
        assert not self.trail_lim, "clauses can only be added at decision level 0"
        if not self.ok:
            return
        top = 0
        for l in lits:
            if l == 0:
                raise MalformedInstanceError("literal 0 in clause")
            top = max(top, abs(l))
        self.ensure_vars(top)
        val = self.val
        out: list[int] = []
        for l in lits:
            e = (l << 1) if l > 0 else ((-l << 1) | 1)
            v = val[e]
            if v == 1:
                return  # satisfied at level 0
            if v == 2:
                continue  # falsified at level 0, drop
            if e ^ 1 in out:
                return  # tautology
            if e not in out:
                out.append(e)
        if not out:
            self.ok = False
            return
        if len(out) == 1:
            self._assign(out[0], None)
            if self._propagate() is not None:
                self.ok = False
            return
        if len(out) == 2:
            a, b = out
            self.bwatch[a].append(b)
            self.bwatch[b].append(a)
            self.clauses.append(out)
            return
        self.watches[out[0]].append(out)
        self.watches[out[1]].append(out)
        self.clauses.append(out)

    # ------------------------------------------------------------ internals

    def _assign(self, e: int, reason) -> None:
        self.val[e] = 1
        self.val[e ^ 1] = 2
        v = e >> 1
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.trail.append(e)

    def _propagate(self):
        """Unit propagation; returns a conflicting clause or None."""
        val = self.val
        trail = self.trail
        watches = self.watches
        bwatch = self.bwatch
        level = self.level
        reason = self.reason
        dl = len(self.trail_lim)
        nprops = 0
        qhead = self.qhead
        while qhead < len(trail):
            p = trail[qhead]
            qhead += 1
            fe = p ^ 1
            nprops += 1
            for o in bwatch[fe]:
                w = val[o]
                if w == 0:
                    val[o] = 1
                    val[o ^ 1] = 2
                    v = o >> 1
                    level[v] = dl
                    reason[v] = [o, fe]
                    trail.append(o)
                elif w == 2:
                    self.qhead = qhead
                    self.stats.propagations += nprops
                    return [o, fe]
            ws = watches[fe]
            i = j = 0
            n = len(ws)
            while i < n:
                c = ws[i]
                i += 1
                if not c:
                    continue  # clause was deleted
                if c[0] == fe:
                    c[0] = c[1]
                    c[1] = fe
                first = c[0]
                if val[first] == 1:
                    ws[j] = c
                    j += 1
                    continue
                found = False
                for k in range(2, len(c)):
                    lk = c[k]
                    if val[lk] != 2:
                        c[1] = lk
                        c[k] = fe
                        watches[lk].append(c)
                        found = True
                        break
                if found:
                    continue
                ws[j] = c
                j += 1
                if val[first] == 2:
                    while i < n:
                        ws[j] = ws[i]
                        j += 1
                        i += 1
                    del ws[j:]
                    self.qhead = qhead
                    self.stats.propagations += nprops
                    return c
                val[first] = 1
                val[first ^ 1] = 2
                v = first >> 1
                level[v] = dl
                reason[v] = c
                trail.append(first)
            del ws[j:]
        self.qhead = qhead
        self.stats.propagations += nprops
        return None

    def _bump_var(self, v: int) -> None:
        # conflict-side variables are on the trail; they re-enter the heap
        # with their fresh activity when the backjump unassigns them
        act = self.activity[v] + self.var_inc
        self.activity[v] = act
        if act > 1e100:
            scale = 1e-100
            for i in range(1, self.nvars + 1):
                self.activity[i] *= scale
            self.var_inc *= scale

    def _bump_clause(self, c: list) -> None:
        i = id(c)
        act = self.cla_act.get(i)
        if act is None:
            return
        act += self.cla_inc
        self.cla_act[i] = act
        if act > 1e20:
            scale = 1e-20
            for k in self.cla_act:
                self.cla_act[k] *= scale
            self.cla_inc *= scale

    def _analyze(self, confl) -> tuple[list[int], int, int]:
        """First-UIP learning; returns (learnt clause, backjump level, lbd)."""
        seen = self.seen
        level = self.level
        trail = self.trail
        reason = self.reason
        activity = self.activity
        branchable = self.branchable
        var_inc = self.var_inc
        cur = len(self.trail_lim)
        learnt = [0]
        to_clear = []
        pathc = 0
        p = -1
        idx = len(trail) - 1
        c = confl
        rescale = False
        while True:
            self._bump_clause(c)
            for qi in range(0 if p == -1 else 1, len(c)):
                q = c[qi]
                v = q >> 1
                lv = level[v]
                if not seen[v] and lv > 0:
                    seen[v] = 1
                    to_clear.append(v)
                    # implied definitions earn decision rights once they take
                    # part in conflicts; refutations often need them
                    branchable[v] = 1
                    a = activity[v] + var_inc
                    activity[v] = a
                    if a > 1e100:
                        rescale = True
                    if lv >= cur:
                        pathc += 1
                    else:
                        learnt.append(q)
            while not seen[trail[idx] >> 1]:
                idx -= 1
            p = trail[idx]
            idx -= 1
            v = p >> 1
            c = reason[v]
            seen[v] = 0
            pathc -= 1
            if pathc <= 0:
                break
        learnt[0] = p ^ 1
        if rescale:
            scale = 1e-100
            for i in range(1, self.nvars + 1):
                activity[i] *= scale
            self.var_inc *= scale

        # cheap local minimization: a literal is redundant if its reason
        # consists entirely of seen or level-0 literals
        if len(learnt) > 1:
            kept = [learnt[0]]
            for q in learnt[1:]:
                r = self.reason[q >> 1]
                if r is None:
                    kept.append(q)
                    continue
                for l in r:
                    lv = l >> 1
                    if lv != (q >> 1) and not seen[lv] and level[lv] > 0:
                        kept.append(q)
                        break
            learnt = kept

        for v in to_clear:
            seen[v] = 0

        if len(learnt) == 1:
            bt = 0
        else:
            mi = 1
            for i in range(2, len(learnt)):
                if level[learnt[i] >> 1] > level[learnt[mi] >> 1]:
                    mi = i
            learnt[1], learnt[mi] = learnt[mi], learnt[1]
            bt = level[learnt[1] >> 1]
        lbd = len({level[q >> 1] for q in learnt})
        return learnt, bt, lbd

    def _cancel_until(self, lvl: int) -> None:
        if len(self.trail_lim) <= lvl:
            return
        val = self.val
        heap = self.heap
        activity = self.activity
        polarity = self.polarity
        branchable = self.branchable
        reason = self.reason
        bound = self.trail_lim[lvl]
        for i in range(len(self.trail) - 1, bound - 1, -1):
            e = self.trail[i]
            v = e >> 1
            polarity[v] = 1 - (e & 1)
            val[e] = 0
            val[e ^ 1] = 0
            reason[v] = None
            if branchable[v]:
                heappush(heap, (-activity[v], v))
        del self.trail[bound:]
        del self.trail_lim[lvl:]
        self.qhead = bound

    def _record_learnt(self, learnt: list[int], lbd: int) -> None:
        if len(learnt) == 1:
            self._assign(learnt[0], None)
            return
        if len(learnt) == 2:
            a, b = learnt
            self.bwatch[a].append(b)
            self.bwatch[b].append(a)
        else:
            self.watches[learnt[0]].append(learnt)
            self.watches[learnt[1]].append(learnt)
            self.learnts.append(learnt)
            self.cla_act[id(learnt)] = self.cla_inc
            self.cla_lbd[id(learnt)] = lbd
        self._assign(learnt[0], learnt)

    def _reduce_db(self) -> None:
        # drop the least useful half of the long learnt clauses
        learnts = self.learnts
        ranked = sorted(
            learnts,
            key=lambda c: (-self.cla_lbd[id(c)], self.cla_act[id(c)]),
        )
        locked = {id(self.reason[e >> 1]) for e in self.trail if self.reason[e >> 1] is not None}
        drop = len(ranked) // 2
        kept = []
        for i, c in enumerate(ranked):
            if i < drop and self.cla_lbd[id(c)] > 3 and id(c) not in locked:
                del self.cla_act[id(c)]
                del self.cla_lbd[id(c)]
                c.clear()  # watch lists skip empty clauses lazily
            else:
                kept.append(c)
        self.learnts = kept

    def _pick_branch(self) -> int:
        heap = self.heap
        val = self.val
        if len(heap) > 4 * self.nvars + 1024:
            # lazy heap accumulates stale duplicates; rebuild occasionally
            fresh = [
                (-self.activity[v], v)
                for v in range(1, self.nvars + 1)
                if val[v << 1] == 0 and self.branchable[v]
            ]
            fresh.sort()
            self.heap = heap = fresh
        while heap:
            _, v = heappop(heap)
            if val[v << 1] == 0:
                return (v << 1) | (0 if self.polarity[v] else 1)
        # safety net: decide anything still open (implied vars included, in
        # case a one-sided definition left slack)
        for v in range(1, self.nvars + 1):
            if val[v << 1] == 0:
                return (v << 1) | (0 if self.polarity[v] else 1)
        return -1

    # ---------------------------------------------------------------- solve

    def solve(
        self,
        assumptions: Sequence[int] = (),
        conflict_budget: int | None = None,
        time_budget: float | None = None,
    ) -> str:
        """Returns SAT/UNSAT/TIMEOUT; on SAT, self.model holds the assignment."""
        t0 = time.monotonic()
        deadline = t0 + time_budget if time_budget is not None else None
        self._cancel_until(0)
        if not self.ok or self._propagate() is not None:
            self.ok = False
            return UNSAT
        if deadline is not None and time.monotonic() > deadline:
            return TIMEOUT
        assume = []
        for l in assumptions:
            self.ensure_vars(abs(l))
            assume.append((abs(l) << 1) | (0 if l > 0 else 1))

        conflicts_at_start = self.stats.conflicts
        max_learnts = max(4000, len(self.clauses) // 3)
        restart_n = 0
        budget = _RESTART_BASE * _luby(restart_n)
        conf_this_restart = 0

        while True:
            confl = self._propagate()
            if confl is not None:
                self.stats.conflicts += 1
                conf_this_restart += 1
                if not self.trail_lim:
                    self.ok = False
                    return UNSAT
                learnt, bt, lbd = self._analyze(confl)
                # never undo assumption decisions unless forced below them
                self._cancel_until(bt)
                self._record_learnt(learnt, lbd)
                self.var_inc /= _VAR_DECAY
                self.cla_inc /= _CLAUSE_DECAY
                nconf = self.stats.conflicts - conflicts_at_start
                if conflict_budget is not None and nconf >= conflict_budget:
                    self._cancel_until(0)
                    return TIMEOUT
                if nconf % 256 == 0:
                    if deadline is not None and time.monotonic() > deadline:
                        self._cancel_until(0)
                        return TIMEOUT
                    if len(self.learnts) > max_learnts:
                        self._reduce_db()
                continue
            if conf_this_restart >= budget:
                restart_n += 1
                budget = _RESTART_BASE * _luby(restart_n)
                conf_this_restart = 0
                self._cancel_until(0)
                continue
            dl = len(self.trail_lim)
            if dl < len(assume):
                e = assume[dl]
                w = self.val[e]
                if w == 1:
                    self.trail_lim.append(len(self.trail))
                    continue
                if w == 2:
                    self._cancel_until(0)
                    return UNSAT
                self.trail_lim.append(len(self.trail))
                self._assign(e, None)
                continue
            e = self._pick_branch()
            if e == -1:
                self.model = [False] * (self.nvars + 1)
                for v in range(1, self.nvars + 1):
                    self.model[v] = self.val[v << 1] == 1
                self._cancel_until(0)
                return SAT
            self.stats.decisions += 1
            if self.stats.decisions % 4096 == 0 and deadline is not None:
                if time.monotonic() > deadline:
                    self._cancel_until(0)
                    return TIMEOUT
            self.trail_lim.append(len(self.trail))
            self._assign(e, None)


def _verify_model(clauses: Iterable[Sequence[int]], model: list[bool]) -> None:
    for c in clauses:
        for l in c:
            v = model[l] if l > 0 else not model[-l]
            if v:
                break
        else:
            raise ModelVerificationError(f"model does not satisfy clause {tuple(c)}")


class SatContext:
    """A solver attached to one growing clause database.

    Supports repeated solve calls under assumptions, with clause additions
    in between; previously derived UNSAT-under-assumption answers stay valid
    because clauses are only ever added.  Internals are mutable lists so
    growth is O(added); ``instance`` materializes a frozen snapshot.
    """

    def __init__(self, inst: CnfInstance, backend: "str | ExternalSolver" = "internal"):
        self._clauses: list[tuple[int, ...]] = list(inst.clauses)
        self._groups = dict(inst.groups)
        self._selectors = dict(inst.selectors)
        self._implied: list[int] = list(inst.implied_vars)
        self._num_vars = inst.num_vars
        self.backend = backend
        self._cdcl: Cdcl | None = None
        if backend == "internal":
            self._cdcl = Cdcl()
            self._cdcl.ensure_vars(inst.num_vars)
            self._cdcl.mark_implied(inst.implied_vars)
            for c in inst.clauses:
                self._cdcl.add_clause(c)

    @property
    def instance(self) -> CnfInstance:
        return CnfInstance(
            self._num_vars, tuple(self._clauses), dict(self._groups),
            dict(self._selectors), tuple(self._implied),
        )

    @property
    def num_vars(self) -> int:
        return self._num_vars

    def add_clauses(
        self,
        clauses: Iterable[Sequence[int]],
        num_vars: int | None = None,
        implied_vars: Sequence[int] = (),
    ) -> None:
        clauses = [tuple(c) for c in clauses]
        top = self._num_vars if num_vars is None else max(self._num_vars, num_vars)
        for c in clauses:
            for lit in c:
                if abs(lit) > top:
                    top = abs(lit)
        self._num_vars = top
        self._clauses.extend(clauses)
        self._implied.extend(implied_vars)
        if self._cdcl is not None:
            self._cdcl.ensure_vars(top)
            self._cdcl.mark_implied(implied_vars)
            for c in clauses:
                self._cdcl.add_clause(c)

    def solve(
        self,
        assumptions: Sequence[int] = (),
        time_budget: float | None = None,
        conflict_budget: int | None = None,
    ) -> SolveResult:
        for l in assumptions:
            if l == 0 or abs(l) > self._num_vars:
                raise MalformedInstanceError(f"assumption {l} references an undeclared variable")
        t0 = time.monotonic()
        if self._cdcl is not None:
            solver = self._cdcl
            before = SolveStats(solver.stats.conflicts, solver.stats.decisions, solver.stats.propagations)
            status = solver.solve(assumptions, conflict_budget, time_budget)
            stats = SolveStats(
                solver.stats.conflicts - before.conflicts,
                solver.stats.decisions - before.decisions,
                solver.stats.propagations - before.propagations,
                time.monotonic() - t0,
            )
            raw = solver.model if status == SAT else None
        else:
            status, raw = self.backend.solve_dimacs(self.instance, assumptions, time_budget)
            stats = SolveStats(wall_time=time.monotonic() - t0)
        if status != SAT:
            return SolveResult(status, stats=stats)
        assert raw is not None
        _verify_model(self._clauses, raw)
        for l in assumptions:
            if not (raw[l] if l > 0 else not raw[-l]):
                raise ModelVerificationError(f"model violates assumption {l}")
        groups = {name: tuple(_lit_val(raw, l) for l in lits) for name, lits in self._groups.items()}
        return SolveResult(SAT, model=groups, raw_model=raw, stats=stats)


def _lit_val(model: list[bool], lit: int) -> int:
    return int(model[lit] if lit > 0 else not model[-lit])


def solve(
    inst: CnfInstance,
    assumptions: Sequence[int] = (),
    time_budget: float | None = None,
    backend: "str | ExternalSolver" = "internal",
) -> SolveResult:
    """One-shot solve of an instance (fresh solver state)."""
    return SatContext(inst, backend).solve(assumptions, time_budget)


def add_clauses(inst: CnfInstance, clauses: Iterable[Sequence[int]]) -> CnfInstance:
    """Pure clause append; solver-facing incremental growth lives in SatContext."""
    return inst.extended(clauses)


class ExternalSolver:
    """Backend running `argv + [cnf_path]` per call; expects DIMACS output.

    The process must print `s SATISFIABLE` / `s UNSATISFIABLE` (or the bare
    words) and, when satisfiable, `v` lines with a 0-terminated model.
    """

    def __init__(self, argv: Sequence[str]):
        self.argv = list(argv)

    def solve_dimacs(
        self, inst: CnfInstance, assumptions: Sequence[int], time_budget: float | None
    ) -> tuple[str, list[bool] | None]:
        import subprocess
        import tempfile

        work = inst
        units = [(l,) for l in assumptions]
        if units:
            work = inst.extended(units)
        with tempfile.NamedTemporaryFile("w", suffix=".cnf", delete=False) as fh:
            fh.write(work.to_dimacs())
            path = fh.name
        try:
            proc = subprocess.run(
                self.argv + [path],
                capture_output=True,
                text=True,
                timeout=time_budget,
            )
        except subprocess.TimeoutExpired:
            return TIMEOUT, None
        text = proc.stdout
        status = None
        lits: list[int] = []
        for line in text.splitlines():
            line = line.strip()
            if line.startswith("s ") or line in ("SATISFIABLE", "UNSATISFIABLE"):
                word = line.split()[-1].upper()
                status = SAT if word == "SATISFIABLE" else UNSAT
            elif line.startswith("v "):
                lits.extend(int(x) for x in line[2:].split())
        if status is None:
            raise RuntimeError(f"external solver produced no status line: {text[:200]!r}")
        if status != SAT:
            return status, None
        model = [False] * (inst.num_vars + 1)
        for l in lits:
            if l != 0 and abs(l) <= inst.num_vars:
                model[abs(l)] = l > 0
        return SAT, model


def _dimacs_main(argv: list[str]) -> int:
    if len(argv) != 1:
        print("usage: python -m seqdecam.sat FILE.cnf", file=sys.stderr)
        return 2
    nvars = 0
    clauses = []
    implied: list[int] = []
    with open(argv[0]) as fh:
        for line in fh:
            line = line.strip()
            if not line or line[0] in "cp%0":
                if line.startswith("p cnf"):
                    nvars = int(line.split()[2])
                elif line.startswith("c implied "):
                    implied.extend(int(x) for x in line.split()[2:])
                continue
            lits = [int(x) for x in line.split()]
            if lits and lits[-1] == 0:
                lits.pop()
            clauses.append(tuple(lits))
    solver = Cdcl()
    solver.ensure_vars(nvars)
    solver.mark_implied(implied)
    for c in clauses:
        solver.add_clause(c)
    status = solver.solve()
    if status == SAT:
        print("s SATISFIABLE")
        lits = [v if solver.model[v] else -v for v in range(1, solver.nvars + 1)]
        for i in range(0, len(lits), 20):
            print("v " + " ".join(str(x) for x in lits[i : i + 20]))
        print("v 0")
        return 10
    print("s UNSATISFIABLE")
    return 20


if __name__ == "__main__":
    sys.exit(_dimacs_main(sys.argv[1:]))
