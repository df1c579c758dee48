import logging
from collections import defaultdict

from src.analysis.classify import PointerPartition
from src.analysis.objects import STAR, AbstractObject, SiteKind
from src.analysis.state import PointsToState
from src.ir.module import Module
from src.ir.printer import module_hash
from src.ir.types import POINTER_SIZE
from src.metadata.records import (
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
    record_sort_key,
)

logger = logging.getLogger(__name__)


def assign_global_indices(module: Module) -> dict[str, int]:
    return {name: index for index, name in enumerate(sorted(glob.name for glob in module.globals))}


def assign_function_ids(module: Module) -> dict[str, int]:
    return {func.name: function_id for function_id, func in enumerate(module.functions)}


def assign_slot_ids(module: Module) -> dict[tuple[str, int], int]:
    """
    Dense per-function slot ids in the order the allocas appear.
    """
    slots = {}
    for func in module.functions:
        for slot_id, (index, _) in enumerate(func.stack_sites()):
            slots[(func.name, index)] = slot_id
    return slots


def _aligned_offsets(size: int) -> tuple[int, ...]:
    return tuple(range(0, size - POINTER_SIZE + 1, POINTER_SIZE))


def _scan_offsets(state: PointsToState, obj: AbstractObject, type_name: str, size: int) -> tuple[int, ...]:
    """
    Cells of a global or stack object that may hold a heap address: the
    pointer fields of its declared type plus every field the analysis saw
    holding one. Unknown-field facts widen the scan to every aligned cell.
    """
    offsets = set(state.types.pointer_offsets(type_name))

    def reaches_heap(node) -> bool:
        return any(target.base.site_kind == SiteKind.HEAP for target in state.points_to(node))

    if reaches_heap(obj):
        offsets.add(0)
    for offset, sub in state.fields_of(obj).items():
        if not reaches_heap(sub):
            continue
        if offset == STAR:
            return _aligned_offsets(size)
        offsets.add(offset)
    offsets = {offset for offset in offsets if offset + POINTER_SIZE <= size}
    if not offsets and reaches_heap(obj):
        return _aligned_offsets(size)
    return tuple(sorted(offsets))


def build_tables(state: PointsToState, classes: PointerPartition, module: Module) -> ObjectPointerTable:
    global_indices = assign_global_indices(module)
    function_ids = assign_function_ids(module)
    slot_ids = assign_slot_ids(module)

    records: dict[int, set[StaticPointerRecord]] = defaultdict(set)
    for pointer in classes.heap.values():
        offset = ANY_POINTER_FIELD if pointer.offset == STAR else pointer.offset
        record = HeapFieldRecord(container_static_id=pointer.container.static_id, offset=offset)
        for target in pointer.heap_targets:
            records[target.static_id].add(record)
    for pointer in classes.globals.values():
        record = GlobalRecord(index=global_indices[pointer.container.symbol])
        for target in pointer.heap_targets:
            records[target.static_id].add(record)
    for pointer in classes.stack.values():
        container = pointer.container
        record = StackRecord(
            function_id=function_ids[container.function],
            slot_id=slot_ids[(container.function, container.index)],
        )
        for target in pointer.heap_targets:
            records[target.static_id].add(record)

    objects = {}
    layouts = {}
    for obj in state.objects.heap:
        objects[obj.static_id] = tuple(sorted(records.get(obj.static_id, ()), key=record_sort_key))
        type_names = state.types_of(obj)
        pointer_offsets = set()
        for type_name in type_names:
            pointer_offsets |= state.types.pointer_offsets(type_name)
        layouts[obj.static_id] = ObjectLayout(
            static_id=obj.static_id, typed=bool(type_names), pointer_offsets=tuple(sorted(pointer_offsets))
        )

    globals_by_name = module.global_map()
    global_layouts = []
    for name, index in global_indices.items():
        glob = globals_by_name[name]
        size = module.global_size(glob)
        global_layouts.append(
            GlobalLayout(
                index=index,
                name=name,
                size=size,
                pointer_offsets=_scan_offsets(state, state.objects.globals[name], glob.type_name, size),
            )
        )

    function_layouts = []
    for func in module.functions:
        slots = []
        for index, inst in func.stack_sites():
            size = module.alloca_size(inst)
            obj = state.objects.site(func.name, index)
            slots.append(
                SlotLayout(
                    slot_id=slot_ids[(func.name, index)],
                    size=size,
                    pointer_offsets=_scan_offsets(state, obj, inst.type_operand, size),
                )
            )
        function_layouts.append(
            FunctionLayout(function_id=function_ids[func.name], name=func.name, slots=tuple(slots))
        )

    table = ObjectPointerTable(
        build_hash=module_hash(module),
        objects=objects,
        object_layouts=layouts,
        globals=tuple(global_layouts),
        functions=tuple(function_layouts),
    )
    logger.info("Built pointer tables: %d objects, %d records", len(objects), table.record_count())
    return table


def expand_any_field(table: ObjectPointerTable, container_static_id: int, size: int) -> tuple[int, ...]:
    """
    Offsets checked for an ANY_POINTER_FIELD record inside a container of
    ``size`` bytes.
    """
    layout = table.object_layouts.get(container_static_id)
    if layout is None or not layout.typed:
        return _aligned_offsets(size)
    return tuple(offset for offset in layout.pointer_offsets if offset + POINTER_SIZE <= size)
