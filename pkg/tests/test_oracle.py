import io
import random
import threading

import pytest

from seqdecam.netlist import BitSeq, Completion, run_sequence
from seqdecam.gen import random_camo, random_circuit
from seqdecam.oracle import BlackBox, OracleConflictError, QuerySet, record, serve_pipe_oracle

from conftest import S27_SECRET


@pytest.fixture
def s27_box(s27_camo):
    return BlackBox(s27_camo, S27_SECRET)


def test_empty_query_counts(s27_box):
    out = s27_box.query(BitSeq(4))
    assert out == BitSeq(1)
    assert s27_box.query_count == 1
    assert s27_box.step_count == 0


def test_single_step_queries_all_zero_information(s27_box, s27_camo):
    # every 1-step answer matches every completion, so nothing is learned
    for i in range(16):
        out = s27_box.query(BitSeq(4, (i,)))
        for x in s27_camo.all_completions():
            assert run_sequence(s27_camo, x, BitSeq(4, (i,))) == out


def test_two_step_sequence_reveals_first_cell(s27_box):
    out = s27_box.query(BitSeq(4, (8, 9)))
    assert out.steps[-1] == 1  # G13 is a NAND in the secret


def test_width_mismatch(s27_box):
    with pytest.raises(ValueError):
        s27_box.query(BitSeq(3, (1,)))


def test_counters_are_thread_safe(s27_box):
    def worker():
        for _ in range(50):
            s27_box.query(BitSeq(4, (5, 2)))

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert s27_box.query_count == 400
    assert s27_box.step_count == 800


def test_secret_not_on_public_surface(s27_camo):
    box = BlackBox(s27_camo, S27_SECRET)
    public = {k: v for k, v in vars(box).items() if not k.startswith("_")}
    assert not any(isinstance(v, Completion) for v in public.values())
    assert "secret" not in dir(box)


def test_query_determinism_over_random_circuits():
    rng = random.Random(99)
    for _ in range(1000):
        camo, secret = random_camo(rng, random_circuit(rng))
        box = BlackBox(camo, secret)
        m = camo.num_inputs
        seq = BitSeq(m, tuple(rng.randrange(1 << m) for _ in range(rng.randint(0, 5))))
        assert box.query(seq) == box.query(seq)


# ---------------------------------------------------------------- QuerySet

def test_record_set_semantics():
    i1 = BitSeq(2, (1, 3))
    o1 = BitSeq(1, (0, 1))
    qs = record(QuerySet(), i1, o1)
    assert len(qs) == 1
    assert len(record(qs, i1, o1)) == 1  # exact duplicate is a no-op
    with pytest.raises(OracleConflictError):
        record(qs, i1, BitSeq(1, (0, 0)))


def test_record_length_check():
    with pytest.raises(ValueError):
        record(QuerySet(), BitSeq(2, (1,)), BitSeq(1, (0, 1)))


# ------------------------------------------------------------ pipe protocol

def test_pipe_protocol_roundtrip(s27_camo):
    box = BlackBox(s27_camo, S27_SECRET)
    requests = "Q 2 0001 1001\nQ 0\nnonsense\nQ 1 001\n"
    out = io.StringIO()
    serve_pipe_oracle(box, io.StringIO(requests), out)
    lines = out.getvalue().splitlines()
    assert lines[0] == "A 0 1"  # the G13-revealing sequence
    assert lines[1] == "A"
    assert lines[2].startswith("E ")
    assert lines[3].startswith("E ")  # wrong width
    assert box.query_count == 2


def test_query_budget(s27_camo):
    from seqdecam.oracle import QueryBudgetError

    box = BlackBox(s27_camo, S27_SECRET, query_budget=2)
    box.query(BitSeq(4, (1,)))
    box.query(BitSeq(4, (2,)))
    with pytest.raises(QueryBudgetError):
        box.query(BitSeq(4, (3,)))
    assert box.query_count == 2  # the rejected call does not count
