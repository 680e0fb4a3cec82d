import itertools
import random
import sys

import pytest
from hypothesis import given, settings, strategies as st

from seqdecam.cnf import CnfBuilder, CnfInstance
from seqdecam import sat as sm


def _inst(num_vars, clauses, groups=None):
    return CnfInstance(num_vars, tuple(tuple(c) for c in clauses), groups or {})


def _brute_sat(num_vars, clauses):
    for bits in itertools.product([False, True], repeat=num_vars):
        model = [False] + list(bits)
        if all(any(model[l] if l > 0 else not model[-l] for l in c) for c in clauses):
            return True
    return False


def test_empty_clause_set_is_sat():
    res = sm.solve(_inst(0, []))
    assert res.status == sm.SAT
    assert res.model == {}


def test_unit_contradiction_is_unsat():
    res = sm.solve(_inst(1, [(1,), (-1,)]))
    assert res.status == sm.UNSAT
    assert res.model is None


def test_sat_model_is_verified_against_all_clauses():
    inst = _inst(3, [(1, 2), (-1, 3), (-2, -3)], {"all": (1, 2, 3)})
    res = sm.solve(inst)
    assert res.status == sm.SAT
    bits = res.model["all"]
    for c in inst.clauses:
        assert any(bits[abs(l) - 1] == (1 if l > 0 else 0) for l in c)


def test_assumptions():
    ctx = sm.SatContext(_inst(2, [(1, 2)]))
    assert ctx.solve([-1]).status == sm.SAT
    assert ctx.solve([-1, -2]).status == sm.UNSAT
    assert ctx.solve().status == sm.SAT  # context still reusable


def test_assumption_must_be_declared():
    with pytest.raises(sm.MalformedInstanceError):
        sm.solve(_inst(1, [(1,)]), assumptions=[5])


def test_add_clauses_pure_helper():
    inst = _inst(2, [(1, 2)])
    assert sm.add_clauses(inst, []) == inst
    grown = sm.add_clauses(inst, [(-1,)])
    assert len(grown.clauses) == 2
    assert len(inst.clauses) == 1


def test_incremental_add_then_assume():
    ctx = sm.SatContext(_inst(1, []))
    assert ctx.solve([-1]).status == sm.SAT
    ctx.add_clauses([(1,)])
    assert ctx.solve([-1]).status == sm.UNSAT
    assert ctx.solve([1]).status == sm.SAT


def test_conflict_budget_reports_timeout():
    # pigeonhole: 6 pigeons in 5 holes, comfortably past a 10-conflict budget
    bld = CnfBuilder()
    v = [[bld.new_var() for _ in range(5)] for _ in range(6)]
    for p in range(6):
        bld.add(*v[p])
    for h in range(5):
        for p1 in range(6):
            for p2 in range(p1 + 1, 6):
                bld.add(-v[p1][h], -v[p2][h])
    ctx = sm.SatContext(bld.build())
    assert ctx.solve(conflict_budget=10).status == sm.TIMEOUT
    assert ctx.solve().status == sm.UNSAT


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**9))
def test_agrees_with_brute_force(seed):
    rng = random.Random(seed)
    nv = rng.randint(1, 8)
    clauses = []
    for _ in range(rng.randint(1, 30)):
        clauses.append(
            tuple(rng.choice([1, -1]) * rng.randint(1, nv) for _ in range(rng.randint(1, 3)))
        )
    res = sm.solve(_inst(nv, clauses))
    assert (res.status == sm.SAT) == _brute_sat(nv, clauses)


def test_solver_is_deterministic():
    rng = random.Random(5)
    clauses = [
        tuple(rng.choice([1, -1]) * rng.randint(1, 30) for _ in range(3)) for _ in range(120)
    ]
    inst = _inst(30, clauses)
    first = sm.solve(inst)
    second = sm.solve(inst)
    assert first.status == second.status
    if first.status == sm.SAT:
        assert first.raw_model == second.raw_model
        assert first.stats.conflicts == second.stats.conflicts


def test_dimacs_export_carries_groups():
    bld = CnfBuilder()
    a, b = bld.new_var(), bld.new_var()
    bld.add(a, -b)
    bld.group("pair", [a, b])
    text = bld.build().to_dimacs()
    assert "c group pair 2 3" in text
    assert "p cnf 3 2" in text  # constant-true unit plus the added clause


def test_external_backend_matches_internal():
    ext = sm.ExternalSolver([sys.executable, "-m", "seqdecam.sat"])
    rng = random.Random(11)
    for _ in range(8):
        nv = rng.randint(1, 8)
        clauses = [
            tuple(rng.choice([1, -1]) * rng.randint(1, nv) for _ in range(rng.randint(1, 3)))
            for _ in range(rng.randint(1, 25))
        ]
        inst = _inst(nv, clauses, {"all": tuple(range(1, nv + 1))})
        internal = sm.solve(inst)
        external = sm.solve(inst, backend=ext)
        assert internal.status == external.status
