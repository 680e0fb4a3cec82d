"""The attacker's black-box chip: answers input-sequence queries from reset.

The secret completion is sealed inside a closure; nothing on the public
surface of :class:`BlackBox` exposes it.  A line-oriented pipe protocol is
provided so the oracle can also live in a separate process.
"""

from __future__ import annotations

import shlex
import subprocess
import threading
from dataclasses import dataclass
from typing import IO, Callable

from .netlist import BitSeq, CamoCircuit, Completion, parse_bits, run_sequence


class OracleConflictError(RuntimeError):
    """Two observations of the same input sequence disagreed."""


class QueryBudgetError(RuntimeError):
    """The configured query cap was exhausted."""


def _seal(circuit: CamoCircuit, secret: Completion) -> Callable[[BitSeq], BitSeq]:
    secret.check(circuit)

    def answer(seq: BitSeq) -> BitSeq:
        return run_sequence(circuit, secret, seq)

    return answer


class BlackBox:
    """Query surface over a camouflaged circuit with a hidden completion.

    Counts queries and total applied input steps; counter updates are
    thread-safe.  The completion passed to the constructor is not stored on
    the instance.
    """

    def __init__(self, circuit: CamoCircuit, secret: Completion, query_budget: int | None = None):
        self.num_inputs = circuit.num_inputs
        self.num_outputs = circuit.num_outputs
        self.query_count = 0
        self.step_count = 0
        self.query_budget = query_budget
        self._answer = _seal(circuit, secret)
        self._lock = threading.Lock()

    def query(self, seq: BitSeq) -> BitSeq:
        if seq.width != self.num_inputs:
            raise ValueError(f"query width {seq.width} != {self.num_inputs} inputs")
        with self._lock:
            if self.query_budget is not None and self.query_count >= self.query_budget:
                raise QueryBudgetError(f"query budget of {self.query_budget} exhausted")
            self.query_count += 1
            self.step_count += len(seq)
        return self._answer(seq)


@dataclass(frozen=True)
class QuerySet:
    """Observed (input sequence, output sequence) pairs with set semantics."""

    records: tuple[tuple[BitSeq, BitSeq], ...] = ()

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def sequences(self) -> tuple[BitSeq, ...]:
        return tuple(i for i, _ in self.records)


def record(qs: QuerySet, seq: BitSeq, out: BitSeq) -> QuerySet:
    """Return qs with (seq, out) added; duplicate pairs are a no-op.

    Raises OracleConflictError when seq was already recorded with a
    different output: the oracle must be deterministic.
    """
    if len(out) != len(seq):
        raise ValueError(f"output has {len(out)} steps for {len(seq)} input steps")
    for i, o in qs.records:
        if i == seq:
            if o == out:
                return qs
            raise OracleConflictError(
                f"sequence {seq.to_strings()} observed with both "
                f"{o.to_strings()} and {out.to_strings()}"
            )
    return QuerySet(qs.records + ((seq, out),))


# ------------------------------------------------------------ pipe protocol
#
# One line per query.  Request:  Q <p> <i0> <i1> ... <i{p-1}>
# with each step an m-char bitstring; response:  A <o0> ... <o{p-1}>.
# The circuit resets before every query.  Malformed requests get an
# "E <message>" line; the server keeps running until EOF.

def serve_pipe_oracle(box: BlackBox, infile: IO[str], outfile: IO[str]) -> None:
    """Answer protocol requests from `infile` until EOF."""
    for line in infile:
        line = line.strip()
        if not line:
            continue
        try:
            parts = line.split()
            if parts[0] != "Q":
                raise ValueError(f"unknown request {parts[0]!r}")
            p = int(parts[1])
            if len(parts) != 2 + p:
                raise ValueError(f"expected {p} steps, got {len(parts) - 2}")
            steps = tuple(parse_bits(s, box.num_inputs) for s in parts[2:])
            out = box.query(BitSeq(box.num_inputs, steps))
            outfile.write("A" + "".join(" " + s for s in out.to_strings()) + "\n")
        except Exception as exc:  # protocol errors must not kill the server
            outfile.write(f"E {exc}\n")
        outfile.flush()


class PipeOracle:
    """Client for an oracle process speaking the pipe protocol on stdio."""

    def __init__(self, argv: list[str] | str, num_inputs: int, num_outputs: int):
        if isinstance(argv, str):
            argv = shlex.split(argv)
        self.num_inputs = num_inputs
        self.num_outputs = num_outputs
        self.query_count = 0
        self.step_count = 0
        self._lock = threading.Lock()
        self._proc = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, bufsize=1
        )

    def query(self, seq: BitSeq) -> BitSeq:
        if seq.width != self.num_inputs:
            raise ValueError(f"query width {seq.width} != {self.num_inputs} inputs")
        req = f"Q {len(seq)}" + "".join(" " + s for s in seq.to_strings()) + "\n"
        with self._lock:
            self.query_count += 1
            self.step_count += len(seq)
            self._proc.stdin.write(req)
            self._proc.stdin.flush()
            resp = self._proc.stdout.readline()
        if not resp:
            raise RuntimeError("oracle process closed the pipe")
        parts = resp.split()
        if not parts or parts[0] != "A":
            raise RuntimeError(f"oracle error: {resp.strip()}")
        if len(parts) - 1 != len(seq):
            raise OracleConflictError(
                f"oracle returned {len(parts) - 1} output steps for {len(seq)} inputs"
            )
        steps = tuple(parse_bits(s, self.num_outputs) for s in parts[1:])
        return BitSeq(self.num_outputs, steps)

    def close(self) -> None:
        if self._proc.stdin:
            self._proc.stdin.close()
        self._proc.wait(timeout=10)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
