#!/usr/bin/env python3
"""Fetch ISCAS'89 `.bench` netlists into benchmarks/ and verify their shape.

The acceptance suite needs s344, s349 and s1196; this script tries a list of
long-lived academic mirrors for each circuit and accepts a download only if
it parses and matches the published characteristics (inputs / outputs /
flip-flops / gate count).  Run on a machine with network access:

    python scripts/fetch_benchmarks.py [s344 s349 s1196 ...]
"""

import sys
import urllib.request
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))
from seqdecam.netlist import parse_bench  # noqa: E402

BENCH_DIR = Path(__file__).resolve().parent.parent / "benchmarks"

# circuit -> (inputs, outputs, flip-flops, gates)
EXPECTED = {
    "s27": (4, 1, 3, 10),
    "s344": (9, 11, 15, 160),
    "s349": (9, 11, 15, 161),
    "s382": (3, 6, 21, 158),
    "s400": (3, 6, 21, 162),
    "s444": (3, 6, 21, 181),
    "s526": (3, 6, 21, 193),
    "s820": (18, 19, 5, 289),
    "s832": (18, 19, 5, 287),
    "s953": (16, 23, 29, 395),
    "s1196": (14, 14, 18, 529),
    "s5378": (35, 49, 179, 2779),
}

MIRRORS = [
    "http://www.pld.ttu.ee/~maksim/benchmarks/iscas89/bench/{name}.bench",
    "https://sportlab.usc.edu/~msabrishami/benchmarks/ISCAS89/{name}.bench",
    "https://ddd.fit.cvut.cz/www/prj/Benchmarks/ISCAS89/{name}.bench",
    "https://raw.githubusercontent.com/jpsety/verilog_benchmark_circuits/master/{name}.bench",
]


def fetch(name: str) -> bool:
    want = EXPECTED.get(name)
    dest = BENCH_DIR / f"{name}.bench"
    if dest.exists():
        print(f"{name}: already present")
        return True
    for url in (m.format(name=name) for m in MIRRORS):
        try:
            with urllib.request.urlopen(url, timeout=30) as resp:
                text = resp.read().decode("utf-8", errors="replace")
        except Exception as exc:
            print(f"{name}: {url} -> {exc}")
            continue
        try:
            c = parse_bench(text, name)
        except Exception as exc:
            print(f"{name}: {url} -> unparsable ({exc})")
            continue
        shape = (c.num_inputs, c.num_outputs, c.num_flops, len(c.gates))
        if want and shape != want:
            print(f"{name}: {url} -> shape {shape} != published {want}, rejected")
            continue
        dest.write_text(text)
        print(f"{name}: saved {dest} {shape}")
        return True
    print(f"{name}: FAILED on every mirror")
    return False


def main(argv: list[str]) -> int:
    names = argv or ["s344", "s349", "s1196"]
    BENCH_DIR.mkdir(exist_ok=True)
    ok = all([fetch(n) for n in names])
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
