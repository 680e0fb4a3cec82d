"""The iterative decamouflaging attack and its reference procedures.

The main loop grows a set of input sequences: a bounded search finds two
completions that agree with everything observed so far yet disagree within
the current bound, the oracle arbitrates, and the loser is eliminated.
When no bounded distinguisher remains, three termination checks run in
order of increasing cost: unique completion (UC), combinational equivalence
(CE), and an unbounded check (UMC) via explicit product-machine
reachability.  Small-instance ground truth comes from an exhaustive
pairwise-equivalence procedure over the whole completion space.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import sat as satmod
from .encode import (
    AttackInstance,
    encode_bmc_disagreement,
    encode_ce,
    encode_consistency,
    encode_uc,
)
from .netlist import BitSeq, CamoCircuit, Completion, Evaluator, run_sequence
from .oracle import QuerySet, record

UC, CE, UMC = "UC", "CE", "UMC"
EXHAUSTED, TIMEOUT_TAG = "EXHAUSTED", "TIMEOUT"


class InconclusiveError(RuntimeError):
    """A check hit a configured cap or budget before reaching an answer."""


class ProductCapError(InconclusiveError):
    pass


class SolverTimeoutError(RuntimeError):
    pass


class OracleInconsistentError(RuntimeError):
    """No completion can reproduce the observed black-box behavior."""


class EncodingBugError(RuntimeError):
    """A solver model failed re-simulation; the CNF encoding is wrong."""


@dataclass(frozen=True)
class AttackConfig:
    bmc_inc: int = 10
    max_bound: int = 120
    solver_budget: float | None = None  # seconds per solver call
    umc_mode: str = "explicit"  # explicit | bmc | skip
    seed: int = 0
    backend: str = "internal"
    umc_enum_cap: int = 4096
    product_state_cap: int = 1 << 26
    product_expand_cap: int = 1 << 26
    bf_completion_cap: int = 4096
    enumerate_all: bool = False

    def __post_init__(self):
        if self.bmc_inc < 1:
            raise ValueError("bmc_inc must be >= 1")
        if self.max_bound < self.bmc_inc:
            raise ValueError("max_bound must be >= bmc_inc")
        if self.umc_mode not in ("explicit", "bmc", "skip"):
            raise ValueError(f"unknown umc_mode {self.umc_mode!r}")


@dataclass(frozen=True)
class IterationRecord:
    bound: int
    event: str  # sequence | uc | ce | umc
    seq_len: int | None
    conflicts: int
    decisions: int
    wall: float


@dataclass(frozen=True)
class AttackReport:
    disc_set: QuerySet
    completions: tuple[Completion, ...]
    termination: str
    iterations: tuple[IterationRecord, ...]
    query_count: int
    step_count: int
    bound_reached: int
    wall: float
    partial: dict[str, int | None] | None = None

    @property
    def success(self) -> bool:
        return self.termination in (UC, CE, UMC)

    @property
    def max_seq_len(self) -> int:
        return max((len(i) for i, _ in self.disc_set), default=0)

    @property
    def gates_fixed(self) -> int:
        if self.success:
            return len(self.completions[0].choices) if self.completions else 0
        if self.partial is None:
            return 0
        return sum(1 for v in self.partial.values() if v is not None)


def consistent(camo: CamoCircuit, x: Completion, qs: QuerySet) -> bool:
    """Does completion x reproduce every recorded observation?"""
    return all(run_sequence(camo, x, seq) == out for seq, out in qs)


# ------------------------------------------------------- bounded search

def find_distinguishing(
    camo: CamoCircuit,
    qs: QuerySet,
    bound: int,
    budget: float | None = None,
    backend: str = "internal",
) -> tuple[Completion, Completion, BitSeq] | None:
    """Two qs-consistent completions plus an input sequence they disagree on.

    Returns None when no two consistent completions can be told apart by any
    sequence of length <= bound.  The returned sequence is truncated at its
    first disagreeing step and re-simulated as a self-check.
    """
    if bound < 1:
        raise ValueError("bound must be >= 1")
    inst = encode_bmc_disagreement(camo, qs, bound)
    res = satmod.solve(inst, time_budget=budget, backend=backend)
    if res.status == satmod.TIMEOUT:
        raise SolverTimeoutError(f"bounded search at b={bound} exceeded its budget")
    if res.status == satmod.UNSAT:
        return None
    x1 = completion_from_bits(camo, res.model["key1"])
    x2 = completion_from_bits(camo, res.model["key2"])
    steps = []
    for f in range(bound):
        bits = res.model[f"in{f}"]
        steps.append(sum(b << i for i, b in enumerate(bits)))
    seq = BitSeq(camo.num_inputs, tuple(steps))
    return _check_triple(camo, qs, x1, x2, seq)


def completion_from_bits(camo: CamoCircuit, bits: Sequence[int]) -> Completion:
    """Decode a flat key-bit tuple (cell-major, LSB first) to a Completion."""
    choices = []
    pos = 0
    for cell in camo.cells:
        nbits = max(1, (cell.t - 1).bit_length())
        v = 0
        for i in range(nbits):
            v |= bits[pos + i] << i
        pos += nbits
        choices.append(v)
    return Completion(tuple(choices))


def _check_triple(
    camo: CamoCircuit, qs: QuerySet, x1: Completion, x2: Completion, seq: BitSeq
) -> tuple[Completion, Completion, BitSeq]:
    """Truncate at the first disagreeing step and verify the model's claims."""
    o1 = run_sequence(camo, x1, seq)
    o2 = run_sequence(camo, x2, seq)
    cut = next((i for i, (a, b) in enumerate(zip(o1.steps, o2.steps)) if a != b), None)
    if cut is None:
        raise EncodingBugError("solver model decodes to completions that do not disagree")
    if not consistent(camo, x1, qs) or not consistent(camo, x2, qs):
        raise EncodingBugError("solver model decodes to a completion inconsistent with records")
    return x1, x2, seq.prefix(cut + 1)


# ---------------------------------------------------- termination checks

def check_uc(camo: CamoCircuit, qs: QuerySet, budget: float | None = None,
             backend: str = "internal") -> bool:
    """True iff exactly one completion is consistent with qs (timeout: False)."""
    res = satmod.solve(encode_uc(camo, qs), time_budget=budget, backend=backend)
    return res.status == satmod.UNSAT


def check_ce(camo: CamoCircuit, qs: QuerySet, budget: float | None = None,
             backend: str = "internal") -> bool:
    """True iff all qs-consistent completions are combinationally identical.

    Sound for termination (implies qs is discriminating) but conservative:
    disagreement confined to unreachable states still returns False.
    """
    res = satmod.solve(encode_ce(camo, qs), time_budget=budget, backend=backend)
    return res.status == satmod.UNSAT


# --------------------------------------------- explicit product machine

@dataclass(frozen=True)
class ProductState:
    """Joint state of the two circuit copies during product exploration."""

    s1: int
    s2: int

    def pack(self, num_flops: int) -> int:
        return (self.s1 << num_flops) | self.s2

    @staticmethod
    def unpack(key: int, num_flops: int) -> "ProductState":
        return ProductState(key >> num_flops, key & ((1 << num_flops) - 1))


def product_reachable_pairs(
    camo: CamoCircuit,
    x1: Completion,
    x2: Completion,
    state_cap: int = 1 << 26,
    expand_cap: int = 1 << 26,
) -> list[ProductState]:
    """All joint states reachable from (reset, reset) under shared inputs.

    Only defined when the pair is equivalent (exploration stops early at the
    first observable mismatch otherwise).
    """
    witness, packed = _product_bfs(camo, x1, x2, state_cap, expand_cap)
    if witness is not None:
        raise ValueError("completions are inequivalent; the reach set is partial")
    l = camo.num_flops
    return [ProductState.unpack(key, l) for key in packed]


def product_equiv(
    camo: CamoCircuit,
    x1: Completion,
    x2: Completion,
    state_cap: int = 1 << 26,
    expand_cap: int = 1 << 26,
) -> BitSeq | None:
    """Sequential equivalence of two completions from reset.

    Breadth-first reachability over joint state pairs, expanding every input
    per state; returns None when equivalent, and the shortest disagreeing
    input sequence otherwise.  Raises ProductCapError when the state or
    expansion caps are hit.
    """
    if x1 == x2:
        return None
    return _product_bfs(camo, x1, x2, state_cap, expand_cap)[0]


def _product_bfs(
    camo: CamoCircuit,
    x1: Completion,
    x2: Completion,
    state_cap: int,
    expand_cap: int,
) -> tuple[BitSeq | None, list[int]]:
    m, l = camo.num_inputs, camo.num_flops
    p = 1 << m
    if p > expand_cap:
        raise ProductCapError(f"2^{m} inputs per state exceeds the expansion cap")
    ev1 = Evaluator(camo, x1)
    ev2 = Evaluator(camo, x2)
    s0 = camo.reset_state
    start = (s0 << l) | s0 if l else 0
    visited = {start: 0}
    states: list[int] = [start]
    parent = [-1]
    via = [0]
    frontier = [0]
    expansions = 0
    chunk_states = max(1, (1 << 17) // p)
    input_patterns = [_input_pattern(i, m) for i in range(m)]

    def witness(idx: int, last_input: int) -> BitSeq:
        rev = [last_input]
        while parent[idx] != -1:
            rev.append(via[idx])
            idx = parent[idx]
        return BitSeq(m, tuple(reversed(rev)))

    while frontier:
        nxt_frontier: list[int] = []
        for c0 in range(0, len(frontier), chunk_states):
            chunk = frontier[c0 : c0 + chunk_states]
            w = len(chunk) * p
            expansions += w
            if expansions > expand_cap:
                raise ProductCapError(f"product expansion cap {expand_cap} exceeded")
            block = (1 << p) - 1
            reps = ((1 << (len(chunk) * p)) - 1) // block  # 1 at each block start
            ins = [pat * reps for pat in input_patterns]
            st1, st2 = [], []
            for i in range(l):
                acc1 = acc2 = 0
                for ci, idx in enumerate(chunk):
                    pair = states[idx]
                    if (pair >> (l + i)) & 1:
                        acc1 |= block << (ci * p)
                    if (pair >> i) & 1:
                        acc2 |= block << (ci * p)
                st1.append(acc1)
                st2.append(acc2)
            o1, n1 = ev1.eval(st1, ins, w)
            o2, n2 = ev2.eval(st2, ins, w)
            mism = 0
            for a, b in zip(o1, o2):
                mism |= a ^ b
            if mism:
                j = (mism & -mism).bit_length() - 1
                return witness(chunk[j // p], j % p), states
            keys = _pair_keys(n1, n2, w, l)
            uniq, first = np.unique(keys, return_index=True)
            for key, j in zip(uniq.tolist(), first.tolist()):
                if key not in visited:
                    visited[key] = len(states)
                    states.append(key)
                    parent.append(chunk[j // p])
                    via.append(j % p)
                    nxt_frontier.append(len(states) - 1)
                    if len(states) > state_cap:
                        raise ProductCapError(f"product state cap {state_cap} exceeded")
        frontier = nxt_frontier
    return None, states


def _input_pattern(bit: int, m: int) -> int:
    """Bit mask over the 2^m input enumeration where input wire `bit` is 1."""
    p = 1 << m
    pat = 0
    for v in range(p):
        if (v >> bit) & 1:
            pat |= 1 << v
    return pat


def _bits_array(x: int, width: int) -> np.ndarray:
    raw = np.frombuffer(x.to_bytes((width + 7) // 8, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:width]


def _pair_keys(n1: Sequence[int], n2: Sequence[int], width: int, l: int) -> np.ndarray:
    """Per-scenario (s1 << l) | s2 keys for the joint next state."""
    if 2 * l > 63:
        raise ProductCapError("more than 31 flip-flops per copy; explicit product disabled")
    keys = np.zeros(width, dtype=np.uint64)
    for i in range(l):
        keys |= _bits_array(n2[i], width).astype(np.uint64) << np.uint64(i)
        keys |= _bits_array(n1[i], width).astype(np.uint64) << np.uint64(l + i)
    return keys


# -------------------------------------------------------- unbounded check

def check_umc(
    camo: CamoCircuit,
    qs: QuerySet,
    cfg: AttackConfig | None = None,
    instance: AttackInstance | None = None,
) -> bool:
    """True iff qs is discriminating; raises InconclusiveError at the caps.

    Explicit mode enumerates the consistent completions with iterated
    SAT-plus-blocking and checks pairwise product equivalence; when an
    enumeration or product cap is hit it degrades to bounded search at the
    product-diameter bound 2^(2l), itself capped by max_bound.
    """
    cfg = cfg or AttackConfig()
    if cfg.umc_mode == "skip":
        raise InconclusiveError("unbounded check disabled (umc_mode=skip)")
    if cfg.umc_mode == "explicit":
        try:
            return _umc_explicit(camo, qs, cfg, instance)
        except InconclusiveError:
            pass  # degrade to bounded search at the diameter
    return _umc_bmc(camo, qs, cfg)


def _umc_explicit(
    camo: CamoCircuit, qs: QuerySet, cfg: AttackConfig, instance: AttackInstance | None
) -> bool:
    comps = _enumerate_consistent(camo, qs, cfg, instance)
    if not comps:
        raise OracleInconsistentError("no completion is consistent with the observations")
    for i in range(len(comps)):
        for j in range(i + 1, len(comps)):
            w = product_equiv(
                camo, comps[i], comps[j], cfg.product_state_cap, cfg.product_expand_cap
            )
            if w is not None:
                return False
    return True


def _enumerate_consistent(
    camo: CamoCircuit, qs: QuerySet, cfg: AttackConfig, instance: AttackInstance | None
) -> list[Completion]:
    if instance is not None:
        comps = instance.enumerate_consistent(cfg.umc_enum_cap, cfg.solver_budget)
        if comps is None:
            raise InconclusiveError(f"more than {cfg.umc_enum_cap} consistent completions")
        return comps
    ctx = satmod.SatContext(encode_consistency(camo, qs), backend=cfg.backend)
    key_lits = ctx.instance.groups["key"]
    comps: list[Completion] = []
    while True:
        res = ctx.solve(time_budget=cfg.solver_budget)
        if res.status == satmod.TIMEOUT:
            raise InconclusiveError("solver budget exhausted during enumeration")
        if res.status == satmod.UNSAT:
            return comps
        x = completion_from_bits(camo, res.model["key"])
        comps.append(x)
        if len(comps) > cfg.umc_enum_cap:
            raise InconclusiveError(f"more than {cfg.umc_enum_cap} consistent completions")
        ctx.add_clauses([tuple(-l if b else l for l, b in zip(key_lits, res.model["key"]))])


def _umc_bmc(camo: CamoCircuit, qs: QuerySet, cfg: AttackConfig) -> bool:
    l = camo.num_flops
    diameter = 1 << (2 * l)
    bound = min(diameter, cfg.max_bound)
    try:
        found = find_distinguishing(camo, qs, bound, cfg.solver_budget, cfg.backend)
    except SolverTimeoutError as exc:
        raise InconclusiveError(str(exc)) from exc
    if found is not None:
        return False
    if bound == diameter:
        return True
    raise InconclusiveError(
        f"no distinguisher within b={bound} but the product diameter is {diameter}"
    )


def brute_force_disc(
    camo: CamoCircuit,
    qs: QuerySet,
    completion_cap: int = 4096,
    state_cap: int = 1 << 26,
    expand_cap: int = 1 << 26,
) -> bool:
    """Ground truth for small instances: is qs discriminating?

    Walks every pair of completions in the full space, keeps the pairs that
    both reproduce the observations, and checks each such pair for
    sequential equivalence from reset.
    """
    total = camo.completion_count()
    if total > completion_cap:
        raise InconclusiveError(f"completion space {total} exceeds cap {completion_cap}")
    comps = [x for x in camo.all_completions() if consistent(camo, x, qs)]
    if not comps:
        raise OracleInconsistentError("no completion is consistent with the observations")
    for i in range(len(comps)):
        for j in range(i + 1, len(comps)):
            if product_equiv(camo, comps[i], comps[j], state_cap, expand_cap) is not None:
                return False
    return True


# ------------------------------------------------------------- completion

def recover_completion(
    camo: CamoCircuit, qs: QuerySet, budget: float | None = None, backend: str = "internal"
) -> Completion:
    """Any completion consistent with qs (correct whenever qs is discriminating)."""
    res = satmod.solve(encode_consistency(camo, qs), time_budget=budget, backend=backend)
    if res.status == satmod.UNSAT:
        raise OracleInconsistentError(
            "no completion reproduces the observed behavior; the black box does not "
            "match the netlist (or the encoding is broken)"
        )
    if res.status == satmod.TIMEOUT:
        raise SolverTimeoutError("completion recovery exceeded its budget")
    x = completion_from_bits(camo, res.model["key"])
    if not consistent(camo, x, qs):
        raise EncodingBugError("recovered completion fails re-simulation")
    return x


def partial_completion(
    camo: CamoCircuit,
    qs: QuerySet,
    budget: float | None = None,
    backend: str = "internal",
    instance: AttackInstance | None = None,
) -> dict[str, int | None]:
    """Per-gate verdicts: candidate index if every consistent completion
    agrees on that cell, None when the cell is still ambiguous (or a
    sub-query timed out)."""
    if instance is None:
        ctx = satmod.SatContext(encode_consistency(camo, qs), backend=backend)
        key_lits = list(ctx.instance.groups["key"])

        def pinned_sat(ci: int, v: int) -> str:
            lits = _pin_lits(camo, key_lits, ci, v)
            return ctx.solve(lits, time_budget=budget).status
    else:

        def pinned_sat(ci: int, v: int) -> str:
            return instance.solve_consistent(instance.k1.value_lits(ci, v), budget).status

    verdicts: dict[str, int | None] = {}
    for ci, cell in enumerate(camo.cells):
        feasible: list[int] = []
        timed_out = False
        for v in range(cell.t):
            status = pinned_sat(ci, v)
            if status == satmod.TIMEOUT:
                timed_out = True
                break
            if status == satmod.SAT:
                feasible.append(v)
                if len(feasible) > 1:
                    break
        if timed_out:
            verdicts[cell.gate_out] = None
        elif not feasible:
            raise OracleInconsistentError(
                f"no candidate of cell {cell.gate_out!r} is consistent with the observations"
            )
        else:
            verdicts[cell.gate_out] = feasible[0] if len(feasible) == 1 else None
    return verdicts


def _pin_lits(camo: CamoCircuit, key_lits: list[int], ci: int, v: int) -> list[int]:
    pos = 0
    for i, cell in enumerate(camo.cells):
        nbits = max(1, (cell.t - 1).bit_length())
        if i == ci:
            return [key_lits[pos + j] if (v >> j) & 1 else -key_lits[pos + j] for j in range(nbits)]
        pos += nbits
    raise IndexError(ci)


# --------------------------------------------------------------- the loop

def run_attack(camo: CamoCircuit, oracle, cfg: AttackConfig | None = None) -> AttackReport:
    """The complete attack: grow a discriminating set, then read off a completion.

    `oracle` is anything with query(BitSeq) -> BitSeq plus query_count /
    step_count attributes (BlackBox or PipeOracle).
    """
    cfg = cfg or AttackConfig()
    t_start = time.monotonic()
    inst = AttackInstance(camo, backend=cfg.backend)
    qs = QuerySet()
    iterations: list[IterationRecord] = []
    bound = 0
    termination: str | None = None

    def log(event: str, res: "satmod.SolveResult", seq_len: int | None = None) -> None:
        iterations.append(
            IterationRecord(
                bound, event, seq_len, res.stats.conflicts, res.stats.decisions,
                round(res.stats.wall_time, 6),
            )
        )

    while termination is None:
        if bound + cfg.bmc_inc > cfg.max_bound:
            termination = EXHAUSTED
            break
        bound += cfg.bmc_inc
        while True:
            res = inst.solve_bmc(bound, cfg.solver_budget)
            if res.status == satmod.TIMEOUT:
                termination = TIMEOUT_TAG
                break
            if res.status == satmod.UNSAT:
                break
            x1, x2, raw = inst.decode_bmc(res, bound)
            x1, x2, seq = _check_triple(camo, qs, x1, x2, raw)
            out = oracle.query(seq)
            grown = record(qs, seq, out)
            if len(grown) == len(qs):
                raise EncodingBugError("bounded search returned an already-recorded sequence")
            qs = grown
            # progress: the two witnesses disagree on seq, so at most one of
            # them survives the new record
            if consistent(camo, x1, qs) and consistent(camo, x2, qs):
                raise EncodingBugError("neither counterexample completion was eliminated")
            inst.add_record(seq, out)
            log("sequence", res, len(seq))
        if termination is not None:
            break
        res = inst.solve_uc(cfg.solver_budget)
        log("uc", res)
        if res.status == satmod.UNSAT:
            termination = UC
            break
        res = inst.solve_ce(cfg.solver_budget)
        log("ce", res)
        if res.status == satmod.UNSAT:
            termination = CE
            break
        if cfg.umc_mode != "skip":
            t0 = time.monotonic()
            try:
                umc_true = check_umc(camo, qs, cfg, instance=inst)
            except (InconclusiveError, SolverTimeoutError):
                umc_true = False
            iterations.append(
                IterationRecord(bound, "umc", None, 0, 0, round(time.monotonic() - t0, 6))
            )
            if umc_true:
                termination = UMC
                break

    completions: tuple[Completion, ...] = ()
    partial: dict[str, int | None] | None = None
    if termination in (UC, CE, UMC):
        res = inst.solve_consistent(budget=cfg.solver_budget)
        if res.status == satmod.UNSAT:
            raise OracleInconsistentError(
                "no completion reproduces the observed behavior; the black box does "
                "not match the netlist"
            )
        if res.status == satmod.TIMEOUT:
            termination = TIMEOUT_TAG
        else:
            x = inst.k1.decode(res)
            if not consistent(camo, x, qs):
                raise EncodingBugError("recovered completion fails re-simulation")
            completions = (x,)
            if cfg.enumerate_all:
                allc = inst.enumerate_consistent(cfg.umc_enum_cap, cfg.solver_budget)
                if allc is not None:
                    # with a discriminating set every survivor is correct, so
                    # they must all be mutually equivalent
                    for other in allc:
                        w = product_equiv(
                            camo, allc[0], other, cfg.product_state_cap, cfg.product_expand_cap
                        )
                        if w is not None:
                            raise EncodingBugError(
                                "termination check accepted a non-discriminating set: "
                                f"completions differ on {w.to_strings()}"
                            )
                    completions = tuple(allc)
    if termination in (EXHAUSTED, TIMEOUT_TAG):
        partial = partial_completion(camo, qs, cfg.solver_budget, instance=inst)

    return AttackReport(
        disc_set=qs,
        completions=completions,
        termination=termination,
        iterations=tuple(iterations),
        query_count=oracle.query_count,
        step_count=oracle.step_count,
        bound_reached=bound,
        wall=round(time.monotonic() - t_start, 6),
        partial=partial,
    )
