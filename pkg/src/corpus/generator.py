import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

TYPE_HEADER = (
    "type Inner = struct { x: ptr, y: ptr }",
    "type Node = struct { f0: ptr, f1: ptr, f2: ptr, f3: ptr }",
    "type Arr = array [4 x ptr]",
    "type Mixed = struct { a: ptr, inner: Inner, d: ptr }",
)
OBJECT_TYPES = ("Node", "Arr", "Mixed")
OBJECT_SIZE = 32
CELL_OFFSETS = (0, 8, 16, 24)
FIELD_PATHS = (
    "Node.f0",
    "Node.f1",
    "Node.f2",
    "Node.f3",
    "Arr[0]",
    "Arr[1]",
    "Arr[2]",
    "Arr[3]",
    "Mixed.a",
    "Mixed.inner",
    "Mixed.inner.x",
    "Mixed.inner.y",
    "Mixed.d",
)
EXTERNAL = "ext_alloc"
MAX_INSTRUCTIONS = 50


@dataclass
class _Body:
    """
    Registers of one function under construction, by how they may be used:
    ``base`` registers point at an object head, ``interior`` registers inside
    one, ``fn`` registers at a function; ``value`` registers are only moved
    around, never dereferenced.
    """

    name: str
    rng: random.Random
    lines: list[str] = field(default_factory=list)
    base: list[str] = field(default_factory=list)
    heap: list[str] = field(default_factory=list)
    interior: list[str] = field(default_factory=list)
    value: list[str] = field(default_factory=list)
    fn: list[str] = field(default_factory=list)
    counter: int = 0

    def fresh(self) -> str:
        self.counter += 1
        return f"r{self.counter}"

    def any_register(self) -> Optional[str]:
        pool = self.base + self.interior + self.value + self.fn
        return self.rng.choice(pool) if pool else None

    def pointer(self) -> Optional[str]:
        pool = self.base + self.interior
        return self.rng.choice(pool) if pool else None


def _emit_step(body: _Body, globals_: list[str], callees: list[str], has_external: bool) -> None:
    rng = body.rng
    options = ["alloca", "malloc", "malloc"]
    if globals_:
        options.append("global")
    if has_external:
        options.append("external")
    if body.base:
        options += ["cast", "field", "field", "field-var", "copy-base"]
    if len(body.base) >= 2:
        options.append("phi-base")
    if body.base or body.interior:
        options += ["store", "store", "store", "load", "load"]
    if callees:
        options += ["call", "fn-pointer"]
    if body.fn:
        options.append("call-indirect")
    if len(body.fn) >= 2:
        options.append("phi-fn")
    if len(body.value) >= 2:
        options.append("phi-value")
    if body.interior:
        options.append("copy-field")

    choice = rng.choice(options)
    reg = body.fresh() if choice != "store" else ""
    if choice == "alloca":
        body.lines.append(f"%{reg} = alloca {rng.choice(OBJECT_TYPES)}")
        body.base.append(reg)
    elif choice == "malloc":
        body.lines.append(f"%{reg} = malloc {OBJECT_SIZE}")
        body.base.append(reg)
        body.heap.append(reg)
    elif choice == "global":
        body.lines.append(f"%{reg} = copy @{rng.choice(globals_)}")
        body.base.append(reg)
    elif choice == "external":
        arg = body.any_register()
        body.lines.append(f"%{reg} = call @{EXTERNAL}({'%' + arg if arg else 'null'})")
        body.base.append(reg)
        body.heap.append(reg)
    elif choice == "cast":
        body.lines.append(f"%{reg} = cast %{rng.choice(body.base)} to {rng.choice(OBJECT_TYPES)}")
        body.base.append(reg)
    elif choice == "field":
        body.lines.append(f"%{reg} = field %{rng.choice(body.base)}, {rng.choice(FIELD_PATHS)}")
        body.interior.append(reg)
    elif choice == "field-var":
        body.lines.append(f"%{reg} = field %{rng.choice(body.base)}, *, {rng.choice(CELL_OFFSETS)}")
        body.interior.append(reg)
    elif choice == "copy-base":
        body.lines.append(f"%{reg} = copy %{rng.choice(body.base)}")
        body.base.append(reg)
    elif choice == "copy-field":
        body.lines.append(f"%{reg} = copy %{rng.choice(body.interior)}")
        body.interior.append(reg)
    elif choice == "phi-base":
        first, second = rng.sample(body.base, 2)
        body.lines.append(f"%{reg} = phi %{first}, %{second}")
        body.base.append(reg)
    elif choice == "phi-fn":
        first, second = rng.sample(body.fn, 2)
        body.lines.append(f"%{reg} = phi %{first}, %{second}")
        body.fn.append(reg)
    elif choice == "phi-value":
        first, second = rng.sample(body.value, 2)
        body.lines.append(f"%{reg} = phi %{first}, %{second}")
        body.value.append(reg)
    elif choice == "store":
        source = body.any_register()
        operand = f"%{source}" if source and rng.random() < 0.85 else rng.choice(("null", "7"))
        body.lines.append(f"store {operand}, %{body.pointer()}")
    elif choice == "load":
        body.lines.append(f"%{reg} = load %{body.pointer()}")
        body.value.append(reg)
    elif choice == "fn-pointer":
        body.lines.append(f"%{reg} = copy @{rng.choice(callees)}")
        body.fn.append(reg)
    elif choice == "call":
        arg = body.any_register()
        body.lines.append(f"%{reg} = call @{rng.choice(callees)}({'%' + arg if arg else 'null'})")
        body.value.append(reg)
    elif choice == "call-indirect":
        arg = body.any_register()
        body.lines.append(f"%{reg} = call %{rng.choice(body.fn)}({'%' + arg if arg else 'null'})")
        body.value.append(reg)


def generate_source(seed: int, max_instructions: int = MAX_INSTRUCTIONS) -> str:
    """
    Text of a random, trap-free module of at most ``max_instructions``
    instructions. Every type has pointer cells at 0, 8, 16 and 24, field
    accesses only start at object heads, frees come last in ``@main`` and
    helpers only call helpers defined after them.
    """
    rng = random.Random(seed)
    globals_ = [f"g{index}" for index in range(rng.randint(0, 2))]
    helpers = [f"h{index}" for index in range(1, rng.randint(0, 3) + 1)]
    has_external = rng.random() < 0.3

    lines = list(TYPE_HEADER)
    lines += [f"global @{name} : {rng.choice(OBJECT_TYPES)}" for name in globals_]
    if has_external:
        lines.append(f"declare @{EXTERNAL}(1)")

    functions = helpers + ["main"]
    # one ret per function, up to two frees in main
    budget = max_instructions - len(functions) - 2
    shares = [max(budget // len(functions), 1)] * len(functions)
    shares[-1] = max(budget - sum(shares[:-1]), 1)

    for position, name in enumerate(functions):
        body = _Body(name=name, rng=rng)
        params = ["p0"] if name != "main" else []
        body.value.extend(params)
        callees = helpers[position + 1:] if name != "main" else helpers
        for _ in range(rng.randint(1, shares[position])):
            _emit_step(body, globals_, callees, has_external)
        if name == "main":
            for victim in rng.sample(body.heap, min(len(body.heap), rng.randint(0, 2))):
                body.lines.append(f"call @free(%{victim})")
        result = body.any_register()
        body.lines.append(f"ret %{result}" if result else "ret")
        header = f"define @{name}({', '.join('%' + p for p in params)}) {{"
        lines += ["", header] + [f"  {line}" for line in body.lines] + ["}"]
    return "\n".join(lines) + "\n"


def write_corpus(directory: Path, seed: int, count: int) -> list[Path]:
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for offset in range(count):
        path = directory / f"random-{seed + offset:05d}.lir"
        path.write_text(generate_source(seed + offset), encoding="utf-8")
        paths.append(path)
    return paths
