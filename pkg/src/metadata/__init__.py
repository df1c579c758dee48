from .builder import assign_function_ids, assign_global_indices, assign_slot_ids, build_tables, expand_any_field
from .codec import HEADER_SIZE, deserialize_tables, read_tables, serialize_tables, write_tables
from .records import (
    ANY_POINTER_FIELD,
    FunctionLayout,
    GlobalLayout,
    GlobalRecord,
    HeapFieldRecord,
    ObjectLayout,
    ObjectPointerTable,
    SlotLayout,
    StackRecord,
    StaticPointerRecord,
)
