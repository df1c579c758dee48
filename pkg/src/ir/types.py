from enum import Enum
from typing import Iterable, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.exceptions import IRValidationError, UnknownFieldError

POINTER_SIZE = 8

PathStep = Union[str, int]


class TypeKind(str, Enum):
    STRUCT = "struct"
    ARRAY = "array"
    SCALAR = "scalar"
    POINTER = "pointer"
    FUNCTION = "function"


LEAF_KINDS = (TypeKind.SCALAR, TypeKind.POINTER, TypeKind.FUNCTION)


class FieldSlot(BaseModel):
    name: str
    offset: int = Field(..., ge=0)
    type_name: str

    model_config = ConfigDict(frozen=True)


class TypeDef(BaseModel):
    """
    A registered program type.

    ``fields`` are the direct members with their byte offsets; for arrays every
    element is its own member named by its index. ``layout`` is the flattened
    list of (absolute offset, leaf type name) pairs computed at registration.
    """

    name: str
    kind: TypeKind
    fields: Tuple[FieldSlot, ...] = ()
    byte_size: int = Field(..., ge=0)
    align: int = Field(1, ge=1)
    element: Optional[str] = None
    length: Optional[int] = None
    layout: Tuple[Tuple[int, str], ...] = ()

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_fields(self) -> "TypeDef":
        if self.kind in LEAF_KINDS and self.fields:
            raise ValueError(f"Leaf type '{self.name}' cannot own fields")
        previous = -1
        for slot in self.fields:
            if slot.offset <= previous:
                raise ValueError(f"Field offsets of '{self.name}' must be strictly increasing")
            if slot.offset >= max(self.byte_size, 1) and self.byte_size:
                raise ValueError(f"Field '{slot.name}' does not fit in '{self.name}'")
            previous = slot.offset
        return self

    @property
    def is_leaf(self) -> bool:
        return self.kind in LEAF_KINDS

    def member(self, step: PathStep) -> FieldSlot:
        if self.kind == TypeKind.ARRAY:
            if not isinstance(step, int) or not 0 <= step < (self.length or 0):
                raise UnknownFieldError(f"Index {step!r} out of range for array '{self.name}'")
            return self.fields[step]
        if self.kind == TypeKind.STRUCT and isinstance(step, str):
            for slot in self.fields:
                if slot.name == step:
                    return slot
        raise UnknownFieldError(f"Type '{self.name}' has no field {step!r}")


BUILTIN_TYPES = (
    TypeDef(name="ptr", kind=TypeKind.POINTER, byte_size=POINTER_SIZE, align=POINTER_SIZE, layout=((0, "ptr"),)),
    TypeDef(name="i8", kind=TypeKind.SCALAR, byte_size=1, align=1, layout=((0, "i8"),)),
    TypeDef(name="i16", kind=TypeKind.SCALAR, byte_size=2, align=2, layout=((0, "i16"),)),
    TypeDef(name="i32", kind=TypeKind.SCALAR, byte_size=4, align=4, layout=((0, "i32"),)),
    TypeDef(name="i64", kind=TypeKind.SCALAR, byte_size=8, align=8, layout=((0, "i64"),)),
    TypeDef(name="fn", kind=TypeKind.FUNCTION, byte_size=0, align=1, layout=((0, "fn"),)),
)
BUILTIN_NAMES = frozenset(t.name for t in BUILTIN_TYPES)


def _round_up(value: int, align: int) -> int:
    return (value + align - 1) // align * align


class TypeTable(BaseModel):
    """
    Named types of a module. User types are registered in declaration order
    and may only reference types registered before them.
    """

    types: dict[str, TypeDef] = Field(default_factory=lambda: {t.name: t for t in BUILTIN_TYPES})
    order: list[str] = Field(default_factory=list)

    def __contains__(self, name: str) -> bool:
        return name in self.types

    def get(self, name: str) -> TypeDef:
        try:
            return self.types[name]
        except KeyError:
            raise IRValidationError(f"Unknown type '{name}'")

    def user_types(self) -> list[TypeDef]:
        return [self.types[name] for name in self.order]

    def _register(self, type_def: TypeDef) -> TypeDef:
        if type_def.name in self.types:
            raise IRValidationError(f"Type '{type_def.name}' is defined twice")
        self.types[type_def.name] = type_def
        self.order.append(type_def.name)
        return type_def

    def _flatten(self, members: Iterable[FieldSlot]) -> Tuple[Tuple[int, str], ...]:
        layout: list[Tuple[int, str]] = []
        for slot in members:
            inner = self.get(slot.type_name)
            layout.extend((slot.offset + offset, leaf) for offset, leaf in inner.layout)
        return tuple(sorted(set(layout)))

    def define_scalar(self, name: str, byte_size: int) -> TypeDef:
        align = min(max(byte_size, 1), POINTER_SIZE)
        return self._register(
            TypeDef(name=name, kind=TypeKind.SCALAR, byte_size=byte_size, align=align, layout=((0, name),))
        )

    def define_struct(self, name: str, members: list[Tuple[str, str]]) -> TypeDef:
        slots: list[FieldSlot] = []
        offset = 0
        align = 1
        seen: set[str] = set()
        for field_name, type_name in members:
            if field_name in seen:
                raise IRValidationError(f"Field '{field_name}' repeated in struct '{name}'")
            seen.add(field_name)
            member = self.get(type_name)
            offset = _round_up(offset, member.align)
            slots.append(FieldSlot(name=field_name, offset=offset, type_name=type_name))
            offset += member.byte_size
            align = max(align, member.align)
        return self._register(
            TypeDef(
                name=name,
                kind=TypeKind.STRUCT,
                fields=tuple(slots),
                byte_size=_round_up(offset, align),
                align=align,
                layout=self._flatten(slots),
            )
        )

    def define_array(self, name: str, element: str, length: int) -> TypeDef:
        if length <= 0:
            raise IRValidationError(f"Array '{name}' must have a positive length")
        member = self.get(element)
        stride = _round_up(member.byte_size, member.align)
        if stride == 0:
            raise IRValidationError(f"Array '{name}' has a zero-sized element type")
        slots = tuple(
            FieldSlot(name=str(index), offset=index * stride, type_name=element) for index in range(length)
        )
        return self._register(
            TypeDef(
                name=name,
                kind=TypeKind.ARRAY,
                fields=slots,
                byte_size=stride * length,
                align=member.align,
                element=element,
                length=length,
                layout=self._flatten(slots),
            )
        )

    def offset_of(self, type_name: str, path: Tuple[PathStep, ...]) -> int:
        """
        Absolute byte offset of ``path`` inside ``type_name``.

        Raises ``UnknownFieldError`` when a step does not resolve.
        """
        current = self.get(type_name)
        offset = 0
        for step in path:
            slot = current.member(step)
            offset += slot.offset
            current = self.get(slot.type_name)
        return offset

    def type_offsets(self, type_name: str) -> frozenset[int]:
        return frozenset(offset for offset, _ in self.get(type_name).layout)

    def pointer_offsets(self, type_name: str) -> frozenset[int]:
        return frozenset(
            offset for offset, leaf in self.get(type_name).layout if self.get(leaf).kind == TypeKind.POINTER
        )


def offset_of(table: TypeTable, type_name: str, path: Tuple[PathStep, ...]) -> int:
    return table.offset_of(type_name, path)


def type_offsets(table: TypeTable, type_name: str) -> frozenset[int]:
    return table.type_offsets(type_name)


def pointer_offsets(table: TypeTable, type_name: str) -> frozenset[int]:
    return table.pointer_offsets(type_name)
