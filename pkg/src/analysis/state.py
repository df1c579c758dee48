from dataclasses import dataclass, field
from typing import Iterable, Optional

from src.analysis.objects import (
    STAR,
    AbstractObject,
    FieldObject,
    Node,
    ObjectTable,
    Offset,
    Target,
)
from src.ir.types import TypeTable

CallSite = tuple[str, int]


@dataclass(frozen=True)
class Diagnostic:
    site: Optional[CallSite]
    message: str

    def __str__(self) -> str:
        if self.site is None:
            return self.message
        return f"{self.site[0]}:{self.site[1]}: {self.message}"


@dataclass
class PointsToState:
    """
    Result of one solver stage. Read-only once returned by a solver.
    """

    stage: int
    objects: ObjectTable
    types: TypeTable
    pt: dict[Node, frozenset[Target]] = field(default_factory=dict)
    type_sets: dict[Target, frozenset[str]] = field(default_factory=dict)
    field_objects: dict[AbstractObject, dict[Offset, FieldObject]] = field(default_factory=dict)
    call_graph: frozenset[tuple[CallSite, str]] = frozenset()
    diagnostics: tuple[Diagnostic, ...] = ()

    def points_to(self, node: Node) -> frozenset[Target]:
        return self.pt.get(node, frozenset())

    def types_of(self, target: Target) -> frozenset[str]:
        return self.type_sets.get(target, frozenset())

    def fields_of(self, base: AbstractObject) -> dict[Offset, FieldObject]:
        return self.field_objects.get(base, {})

    def field_object(self, base: AbstractObject, offset: Offset) -> Optional[FieldObject]:
        return self.fields_of(base).get(offset)

    def locations(self) -> Iterable[Target]:
        for node in self.pt:
            if isinstance(node, (AbstractObject, FieldObject)):
                yield node

    def callees(self, site: CallSite) -> set[str]:
        return {callee for call_site, callee in self.call_graph if call_site == site}

    def may_point_to(self, node: Node, obj: AbstractObject) -> bool:
        return any(target.base == obj for target in self.points_to(node))

    def star_covers(self, base: AbstractObject, offset: int) -> bool:
        """
        Whether ``ô_*`` of ``base`` answers an alias query for ``offset``:
        true for every offset owned by any type of the base.
        """
        if self.field_object(base, STAR) is None:
            return False
        owned = set()
        for type_name in self.types_of(base):
            owned |= self.types.type_offsets(type_name)
        return offset in owned or not owned
