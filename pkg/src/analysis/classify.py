import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator

from src.analysis.objects import AbstractObject, FieldObject, Offset, SiteKind, Target, sort_nodes
from src.analysis.state import PointsToState
from src.ir.module import Module

logger = logging.getLogger(__name__)


class PointerClass(str, Enum):
    HEAP = "heap"
    GLOBAL = "global"
    STACK = "stack"


@dataclass(frozen=True)
class ClassifiedPointer:
    """
    A memory-resident pointer location that may hold a heap address.

    ``container`` is the object owning the cell; ``offset`` is the byte offset
    inside it (0 for the object head, ``*`` for an unknown field).
    """

    pointer_class: PointerClass
    container: AbstractObject
    offset: Offset
    heap_targets: frozenset[AbstractObject]


@dataclass
class PointerPartition:
    heap: dict[tuple[AbstractObject, Offset], ClassifiedPointer] = field(default_factory=dict)
    globals: dict[AbstractObject, ClassifiedPointer] = field(default_factory=dict)
    stack: dict[AbstractObject, ClassifiedPointer] = field(default_factory=dict)

    def __iter__(self) -> Iterator[ClassifiedPointer]:
        yield from self.heap.values()
        yield from self.globals.values()
        yield from self.stack.values()

    def __len__(self) -> int:
        return len(self.heap) + len(self.globals) + len(self.stack)

    def class_of(self, target: Target) -> PointerClass | None:
        base = target.base
        offset = target.offset if isinstance(target, FieldObject) else 0
        if (base, offset) in self.heap:
            return PointerClass.HEAP
        if base in self.globals:
            return PointerClass.GLOBAL
        if base in self.stack:
            return PointerClass.STACK
        return None


def _merge(
    table: dict, key, pointer_class: PointerClass, container: AbstractObject, offset: Offset, targets: frozenset
) -> None:
    existing = table.get(key)
    if existing is not None:
        targets = targets | existing.heap_targets
    table[key] = ClassifiedPointer(pointer_class, container, offset, targets)


def classify_pointers(state: PointsToState, module: Module) -> PointerPartition:
    """
    Split every address-taken location that may point to a heap object into
    heap-resident, global and stack pointers.

    Heap-resident pointers keep their offset; a global or stack object is one
    location regardless of which of its fields holds the pointer. Locations
    that only reach stack, global or function objects are left out.
    """
    partition = PointerPartition()
    for location in sort_nodes(state.locations()):
        heap_targets = frozenset(
            target.base for target in state.points_to(location) if target.base.site_kind == SiteKind.HEAP
        )
        if not heap_targets:
            continue
        container = location.base
        offset = location.offset if isinstance(location, FieldObject) else 0
        kind = container.site_kind
        if kind == SiteKind.HEAP:
            _merge(partition.heap, (container, offset), PointerClass.HEAP, container, offset, heap_targets)
        elif kind == SiteKind.GLOBAL:
            _merge(partition.globals, container, PointerClass.GLOBAL, container, 0, heap_targets)
        elif kind == SiteKind.STACK:
            _merge(partition.stack, container, PointerClass.STACK, container, 0, heap_targets)

    logger.info(
        "Classified %d heap-resident, %d global and %d stack pointers",
        len(partition.heap),
        len(partition.globals),
        len(partition.stack),
    )
    return partition
