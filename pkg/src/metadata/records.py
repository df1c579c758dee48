from typing import Annotated, Dict, Literal, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field

# Offset marker of a heap-field record whose exact field is unknown.
ANY_POINTER_FIELD = -1


class HeapFieldRecord(BaseModel):
    kind: Literal["heap-field"] = "heap-field"
    container_static_id: int = Field(..., ge=1)
    offset: int = Field(..., ge=ANY_POINTER_FIELD)

    model_config = ConfigDict(frozen=True)

    @property
    def any_field(self) -> bool:
        return self.offset == ANY_POINTER_FIELD

    def __str__(self) -> str:
        offset = "ANY" if self.any_field else str(self.offset)
        return f"HeapField{{o{self.container_static_id}, {offset}}}"


class GlobalRecord(BaseModel):
    kind: Literal["global"] = "global"
    index: int = Field(..., ge=0)

    model_config = ConfigDict(frozen=True)

    def __str__(self) -> str:
        return f"Global{{{self.index}}}"


class StackRecord(BaseModel):
    kind: Literal["stack"] = "stack"
    function_id: int = Field(..., ge=0)
    slot_id: int = Field(..., ge=0)

    model_config = ConfigDict(frozen=True)

    def __str__(self) -> str:
        return f"Stack{{{self.function_id}, {self.slot_id}}}"


StaticPointerRecord = Annotated[Union[HeapFieldRecord, GlobalRecord, StackRecord], Field(discriminator="kind")]

_KIND_ORDER = {"heap-field": 0, "global": 1, "stack": 2}


def record_sort_key(record: StaticPointerRecord) -> tuple:
    if isinstance(record, HeapFieldRecord):
        return (0, record.container_static_id, record.offset)
    if isinstance(record, GlobalRecord):
        return (1, record.index, 0)
    return (2, record.function_id, record.slot_id)


class ObjectLayout(BaseModel):
    """
    Pointer cells of a heap container, used to expand ANY_POINTER_FIELD.
    An untyped container is scanned at every pointer-aligned offset.
    """

    static_id: int = Field(..., ge=1)
    typed: bool = False
    pointer_offsets: Tuple[int, ...] = ()

    model_config = ConfigDict(frozen=True)


class GlobalLayout(BaseModel):
    index: int = Field(..., ge=0)
    name: str
    size: int = Field(..., ge=1)
    pointer_offsets: Tuple[int, ...] = ()

    model_config = ConfigDict(frozen=True)


class SlotLayout(BaseModel):
    slot_id: int = Field(..., ge=0)
    size: int = Field(..., ge=1)
    pointer_offsets: Tuple[int, ...] = ()

    model_config = ConfigDict(frozen=True)


class FunctionLayout(BaseModel):
    function_id: int = Field(..., ge=0)
    name: str
    slots: Tuple[SlotLayout, ...] = ()

    model_config = ConfigDict(frozen=True)


class ObjectPointerTable(BaseModel):
    build_hash: bytes = Field(b"\x00" * 16, min_length=16, max_length=16)
    objects: Dict[int, Tuple[StaticPointerRecord, ...]] = Field(default_factory=dict)
    object_layouts: Dict[int, ObjectLayout] = Field(default_factory=dict)
    globals: Tuple[GlobalLayout, ...] = ()
    functions: Tuple[FunctionLayout, ...] = ()

    model_config = ConfigDict(frozen=True)

    @property
    def global_index_map(self) -> Dict[str, int]:
        return {layout.name: layout.index for layout in self.globals}

    @property
    def function_id_map(self) -> Dict[str, int]:
        return {layout.name: layout.function_id for layout in self.functions}

    def records_for(self, static_id: int) -> Tuple[StaticPointerRecord, ...]:
        return self.objects.get(static_id, ())

    def record_count(self) -> int:
        return sum(len(records) for records in self.objects.values())
