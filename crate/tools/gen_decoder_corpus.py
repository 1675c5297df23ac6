#!/usr/bin/env python3
"""Build the decoder fixture: random operand sets for every supported
mnemonic, assembled by LLVM's integrated assembler.

Usage: tools/gen_decoder_corpus.py [clang] > crates/core/tests/fixtures/decoder_corpus.txt
"""
import random
import re
import subprocess
import sys
import tempfile

PER_MNEMONIC = 50
SEED = 20240917

SEWS = ["e8", "e16", "e32", "e64"]
LMULS = ["mf8", "mf4", "mf2", "m1", "m2", "m4", "m8"]


def x(r):
    return f"x{r.randrange(32)}"


def v(r, avoid=()):
    while True:
        n = r.randrange(32)
        if n not in avoid:
            return n


def vsetvli(r):
    ta = r.choice(["ta", "tu"])
    ma = r.choice(["ma", "mu"])
    return f"vsetvli {x(r)}, {x(r)}, {r.choice(SEWS)}, {r.choice(LMULS)}, {ta}, {ma}"


def unit(op):
    return lambda r: f"{op} v{v(r)}, ({x(r)})"


def strided(op):
    return lambda r: f"{op} v{v(r)}, ({x(r)}), {x(r)}"


def indexed(op):
    def gen(r):
        a = v(r)
        return f"{op} v{a}, ({x(r)}), v{v(r, (a,))}"
    return gen


def vv(op):
    def gen(r):
        d = v(r)
        a = v(r, (d,))
        b = v(r, (d,))
        return f"{op} v{d}, v{a}, v{b}"
    return gen


GENERATORS = [
    ("vsetvli", vsetvli),
    ("vsetvl", lambda r: f"vsetvl {x(r)}, {x(r)}, {x(r)}"),
    ("vle64.v", unit("vle64.v")),
    ("vse64.v", unit("vse64.v")),
    ("vlse64.v", strided("vlse64.v")),
    ("vsse64.v", strided("vsse64.v")),
    ("vluxei64.v", indexed("vluxei64.v")),
    ("vsuxei64.v", indexed("vsuxei64.v")),
    ("vadd.vv", vv("vadd.vv")),
    ("vadd.vx", lambda r: f"vadd.vx v{v(r)}, v{v(r)}, {x(r)}"),
    ("vmul.vx", lambda r: f"vmul.vx v{v(r)}, v{v(r)}, {x(r)}"),
    ("vsll.vi", lambda r: f"vsll.vi v{v(r)}, v{v(r)}, {r.randrange(32)}"),
    ("vand.vx", lambda r: f"vand.vx v{v(r)}, v{v(r)}, {x(r)}"),
    ("vid.v", lambda r: f"vid.v v{v(r)}"),
    ("vfadd.vv", vv("vfadd.vv")),
    ("vfsub.vv", vv("vfsub.vv")),
    ("vfmul.vv", vv("vfmul.vv")),
    ("vfmacc.vv", vv("vfmacc.vv")),
    ("vfmv.v.f", lambda r: f"vfmv.v.f v{v(r)}, f{r.randrange(32)}"),
    ("vrgather.vv", vv("vrgather.vv")),
]


def main():
    clang = sys.argv[1] if len(sys.argv) > 1 else "clang"
    r = random.Random(SEED)
    lines = []
    for _, gen in GENERATORS:
        for _ in range(PER_MNEMONIC):
            lines.append(gen(r))
    with tempfile.NamedTemporaryFile("w", suffix=".s") as f:
        f.write("\n".join(lines) + "\n")
        f.flush()
        out = subprocess.run(
            [clang, "-cc1as", "-triple", "riscv64",
             "-target-feature", "+v", "-target-feature", "+d", "-target-feature", "+f",
             "-show-encoding", "-filetype", "asm", f.name, "-o", "-"],
            check=True, capture_output=True, text=True).stdout
    words = []
    for enc in re.findall(r"encoding: \[([^\]]*)\]", out):
        b = [int(t, 16) for t in enc.split(",")]
        words.append(b[0] | b[1] << 8 | b[2] << 16 | b[3] << 24)
    if len(words) != len(lines):
        sys.exit(f"assembled {len(words)} words for {len(lines)} lines")
    print("# word\tsource text (LLVM integrated assembler, seed %d)" % SEED)
    for w, text in zip(words, lines):
        print(f"{w:08x}\t{text}")


if __name__ == "__main__":
    main()
