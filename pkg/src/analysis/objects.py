from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

from src.ir.module import Module, Opcode

STAR = "*"

Offset = Union[int, str]


class SiteKind(str, Enum):
    HEAP = "heap"
    STACK = "stack"
    GLOBAL = "global"
    FUNCTION = "function"


@dataclass(frozen=True)
class AbstractObject:
    """
    One object per allocation site. ``ordinal`` fixes a stable order;
    ``static_id`` is the dense 1-based heap id (0 for non-heap objects).
    """

    id: str
    site_kind: SiteKind
    ordinal: int
    function: Optional[str] = None
    index: Optional[int] = None
    symbol: Optional[str] = None
    static_id: int = 0

    def __str__(self) -> str:
        return self.id

    @property
    def base(self) -> "AbstractObject":
        return self

    @property
    def sort_key(self) -> tuple:
        return (1, self.ordinal, -1, "")


@dataclass(frozen=True)
class FieldObject:
    base: AbstractObject
    offset: Offset

    def __str__(self) -> str:
        return f"{self.base.id}.{self.offset}"

    @property
    def is_star(self) -> bool:
        return self.offset == STAR

    @property
    def sort_key(self) -> tuple:
        if self.offset == STAR:
            return (1, self.base.ordinal, 1 << 62, "")
        return (1, self.base.ordinal, self.offset, "")


@dataclass(frozen=True)
class RegisterVar:
    function: str
    name: str

    def __str__(self) -> str:
        return f"{self.function}.%{self.name}"

    @property
    def sort_key(self) -> tuple:
        return (0, 0, 0, f"{self.function}\x00{self.name}")


@dataclass(frozen=True)
class SymbolVar:
    name: str

    def __str__(self) -> str:
        return f"@{self.name}"

    @property
    def sort_key(self) -> tuple:
        return (0, -1, 0, self.name)


Target = Union[AbstractObject, FieldObject]
Node = Union[RegisterVar, SymbolVar, AbstractObject, FieldObject]


class ObjectTable:
    """
    Every abstract object of a module, enumerated in module order: globals,
    functions, then allocation sites function by function.
    """

    def __init__(self, module: Module):
        self.by_id: dict[str, AbstractObject] = {}
        self.globals: dict[str, AbstractObject] = {}
        self.functions: dict[str, AbstractObject] = {}
        self.sites: dict[tuple[str, int], AbstractObject] = {}
        self.heap: list[AbstractObject] = []
        self.stack: list[AbstractObject] = []

        ordinal = 0
        for glob in module.globals:
            obj = AbstractObject(id=f"@{glob.name}", site_kind=SiteKind.GLOBAL, ordinal=ordinal, symbol=glob.name)
            self.globals[glob.name] = obj
            self.by_id[obj.id] = obj
            ordinal += 1
        for func in module.functions:
            obj = AbstractObject(id=f"@{func.name}", site_kind=SiteKind.FUNCTION, ordinal=ordinal, symbol=func.name)
            self.functions[func.name] = obj
            self.by_id[obj.id] = obj
            ordinal += 1

        externals = {ext.name for ext in module.externals}
        for func in module.functions:
            for index, inst in enumerate(func.body):
                is_external_call = (
                    inst.kind == Opcode.CALL and inst.callee.is_symbol and inst.callee.name in externals
                )
                if inst.kind == Opcode.HEAP_ALLOC or is_external_call:
                    static_id = len(self.heap) + 1
                    obj = AbstractObject(
                        id=f"o{static_id}",
                        site_kind=SiteKind.HEAP,
                        ordinal=ordinal,
                        function=func.name,
                        index=index,
                        static_id=static_id,
                    )
                    self.heap.append(obj)
                elif inst.kind == Opcode.STACK_GLOBAL_ALLOC:
                    obj = AbstractObject(
                        id=f"s{len(self.stack) + 1}",
                        site_kind=SiteKind.STACK,
                        ordinal=ordinal,
                        function=func.name,
                        index=index,
                    )
                    self.stack.append(obj)
                else:
                    continue
                self.sites[(func.name, index)] = obj
                self.by_id[obj.id] = obj
                ordinal += 1

    def heap_by_static_id(self, static_id: int) -> AbstractObject:
        return self.heap[static_id - 1]

    def site(self, function: str, index: int) -> AbstractObject:
        return self.sites[(function, index)]

    def __iter__(self):
        return iter(self.by_id.values())

    def __len__(self) -> int:
        return len(self.by_id)


def sort_nodes(nodes) -> list:
    return sorted(nodes, key=lambda node: node.sort_key)


def format_set(items) -> str:
    return "{" + ", ".join(str(item) for item in sort_nodes(items)) + "}"
