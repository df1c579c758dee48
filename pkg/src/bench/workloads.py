import random
from typing import Callable

from src.exceptions import ConfigurationError
from src.ir.module import Module
from src.ir.parser import parse_module

DEFAULT_SCALE = 32
CALL_DEPTH = 4


def alloc_heavy(scale: int, seed: int) -> str:
    """
    ``scale`` short-lived objects, each published through a global cell and
    released right away.
    """
    lines = [
        "type Item = struct { payload: ptr, next: ptr }",
        "global @last : Item",
        "",
        "define @main() {",
        "  %g = copy @last",
        "  %cell = field %g, Item.payload",
    ]
    rng = random.Random(seed)
    for index in range(scale):
        size = rng.choice((16, 32, 64))
        lines += [
            f"  %o{index} = malloc {size}",
            f"  store {index}, %o{index}",
            f"  store %o{index}, %cell",
            f"  call @free(%o{index})",
        ]
    lines += ["  ret", "}"]
    return "\n".join(lines) + "\n"


def call_intensive(scale: int, seed: int) -> str:
    """
    ``scale`` calls into a chain of ``CALL_DEPTH`` helpers that each spill
    their argument to a stack slot.
    """
    rng = random.Random(seed)
    lines = ["type Pair = struct { left: ptr, right: ptr }", ""]
    lines += [
        "define @leaf(%p0) {",
        "  %s = alloca Pair",
        "  %l = field %s, Pair.left",
        "  store %p0, %l",
        "  %v = load %l",
        "  ret %v",
        "}",
    ]
    for level in range(CALL_DEPTH, 0, -1):
        callee = "leaf" if level == CALL_DEPTH else f"step{level + 1}"
        lines += [
            "",
            f"define @step{level}(%p0) {{",
            "  %s = alloca ptr",
            "  store %p0, %s",
            "  %x = load %s",
            f"  %r = call @{callee}(%x)",
            "  ret %r",
            "}",
        ]
    lines += ["", "define @main() {", f"  %o = malloc {rng.choice((16, 32))}"]
    for index in range(scale):
        lines.append(f"  %r{index} = call @step1(%o)")
    lines += ["  call @free(%o)", "  ret", "}"]
    return "\n".join(lines) + "\n"


def pointer_dense(scale: int, seed: int) -> str:
    """
    ``scale`` nodes with four pointer fields each, linked at random and
    indexed from a global table, then all released.
    """
    rng = random.Random(seed)
    lines = [
        "type Node = struct { f0: ptr, f1: ptr, f2: ptr, f3: ptr }",
        f"type Table = array [{scale} x ptr]",
        "global @table : Table",
        "",
        "define @main() {",
        "  %t = copy @table",
    ]
    for index in range(scale):
        lines += [
            f"  %n{index}.raw = malloc 32",
            f"  %n{index} = cast %n{index}.raw to Node",
            f"  %slot{index} = field %t, Table[{index}]",
            f"  store %n{index}, %slot{index}",
        ]
    for index in range(scale):
        for link in range(4):
            lines += [
                f"  %c{index}.{link} = field %n{index}, Node.f{link}",
                f"  store %n{rng.randrange(scale)}, %c{index}.{link}",
            ]
    for index in range(scale):
        lines.append(f"  call @free(%n{index}.raw)")
    lines += ["  ret", "}"]
    return "\n".join(lines) + "\n"


WORKLOADS: dict[str, Callable[[int, int], str]] = {
    "alloc-heavy": alloc_heavy,
    "call-intensive": call_intensive,
    "pointer-dense": pointer_dense,
}


def workload_source(name: str, scale: int = DEFAULT_SCALE, seed: int = 0) -> str:
    try:
        builder = WORKLOADS[name]
    except KeyError:
        raise ConfigurationError(f"Unknown workload '{name}' (known: {', '.join(WORKLOADS)})")
    return builder(scale, seed)


def build_workload(name: str, scale: int = DEFAULT_SCALE, seed: int = 0) -> Module:
    return parse_module(workload_source(name, scale, seed))
