import pytest
from hypothesis import given
from hypothesis import strategies as st

from src.analysis.stats import emit_statistics
from src.corpus.loader import SCENARIOS, load_module
from src.exceptions import MetadataFormatError
from src.ir.printer import module_hash
from src.metadata.builder import assign_function_ids, assign_global_indices, assign_slot_ids, expand_any_field
from src.metadata.codec import (
    HEADER_SIZE,
    SECTION_HEADER,
    deserialize_tables,
    read_tables,
    serialize_tables,
    write_tables,
)
from src.metadata.records import (
    ANY_POINTER_FIELD,
    FunctionLayout,
    GlobalLayout,
    GlobalRecord,
    HeapFieldRecord,
    ObjectPointerTable,
    SlotLayout,
    StackRecord,
)
from src.tests.oracles import recount_stats
from src.toolchain import compile_module


def test_motivation_tables(motivation, motivation_compiled):
    table = motivation_compiled.metadata

    assert table.build_hash == module_hash(motivation)
    assert table.objects[1] == (StackRecord(function_id=0, slot_id=0),)
    assert table.objects[2] == (
        HeapFieldRecord(container_static_id=1, offset=0),
        StackRecord(function_id=0, slot_id=1),
    )
    assert table.object_layouts[1].typed
    assert table.object_layouts[1].pointer_offsets == (0,)
    assert not table.object_layouts[2].typed
    assert table.functions == (
        FunctionLayout(
            function_id=0,
            name="main",
            slots=(
                SlotLayout(slot_id=0, size=8, pointer_offsets=(0,)),
                SlotLayout(slot_id=1, size=8, pointer_offsets=(0,)),
            ),
        ),
    )
    assert table.record_count() == 3


def test_id_assignment(parse):
    module = parse(
        """
global @zeta : ptr
global @alpha : ptr

define @helper() {
  %x = alloca ptr
  %y = alloca i64
  ret
}

define @main() {
  %z = alloca ptr
  ret
}
"""
    )

    assert assign_global_indices(module) == {"alpha": 0, "zeta": 1}
    assert assign_function_ids(module) == {"helper": 0, "main": 1}
    assert assign_slot_ids(module) == {("helper", 0): 0, ("helper", 1): 1, ("main", 0): 0}


def test_global_scan_offsets_follow_pointer_fields():
    table = compile_module(load_module(SCENARIOS / "global-struct.lir")).metadata

    assert [(g.name, g.pointer_offsets) for g in table.globals] == [("config", (8,))]
    assert table.objects[1] == (GlobalRecord(index=0),)


def test_unknown_field_in_global_widens_scan(compile_source):
    table = compile_source(
        """
type Wide = struct { a: i64, b: i64, c: ptr }
global @w : Wide

define @main() {
  %d = malloc 8
  %g = copy @w
  %k = copy 16
  %x = field %g, *, %k
  store %d, %x
  ret
}
"""
    ).metadata

    assert table.globals[0].pointer_offsets == (0, 8, 16)


def test_any_field_records():
    unstructured = compile_module(load_module(SCENARIOS / "unstructured.lir")).metadata
    typed = compile_module(load_module(SCENARIOS / "any-field.lir")).metadata
    # an unknown-offset store also reaches the head cell
    both = (
        HeapFieldRecord(container_static_id=1, offset=ANY_POINTER_FIELD),
        HeapFieldRecord(container_static_id=1, offset=0),
    )

    assert unstructured.objects[2] == both
    assert expand_any_field(unstructured, 1, 40) == (0, 8, 16, 24, 32)
    assert typed.objects[2] == both
    assert expand_any_field(typed, 1, 32) == (0, 8, 16, 24)
    assert expand_any_field(typed, 1, 16) == (0, 8)


def test_every_heap_object_has_an_entry(scenario_files):
    for path in scenario_files:
        compiled = compile_module(load_module(path))
        heap_ids = {obj.static_id for obj in compiled.analysis.stage2.objects.heap}
        assert set(compiled.metadata.objects) == heap_ids, path.name
        assert set(compiled.metadata.object_layouts) == heap_ids, path.name


def test_statistics_agree_with_tables(scenario_files):
    for path in scenario_files:
        compiled = compile_module(load_module(path))
        counted = emit_statistics(compiled.analysis.stage2, compiled.module, compiled.analysis.classes)
        recounted = recount_stats(compiled.metadata, compiled.module)
        assert counted.model_dump(exclude={"module"}) == recounted.model_dump(exclude={"module"}), path.name


def test_serialized_header(motivation, motivation_compiled):
    data = serialize_tables(motivation_compiled.metadata)

    assert HEADER_SIZE == 28
    assert data[:4] == b"PTMD"
    assert int.from_bytes(data[4:6], "little") == 1
    assert data[8:24] == module_hash(motivation)
    assert int.from_bytes(data[24:28], "little") == 3


def test_tables_survive_the_file_format(tmp_path, motivation_compiled):
    path = tmp_path / "motivation.ptm"
    write_tables(motivation_compiled.metadata, path)

    assert read_tables(path) == motivation_compiled.metadata


RECORDS = st.one_of(
    st.builds(HeapFieldRecord, container_static_id=st.integers(1, 64), offset=st.integers(ANY_POINTER_FIELD, 256)),
    st.builds(GlobalRecord, index=st.integers(0, 16)),
    st.builds(StackRecord, function_id=st.integers(0, 16), slot_id=st.integers(0, 8)),
)
TABLES = st.builds(
    ObjectPointerTable,
    build_hash=st.binary(min_size=16, max_size=16),
    objects=st.dictionaries(st.integers(1, 64), st.lists(RECORDS, max_size=6).map(tuple), max_size=8),
    globals=st.lists(st.text(min_size=1, max_size=12), max_size=4).map(
        lambda names: tuple(
            GlobalLayout(index=index, name=name, size=8, pointer_offsets=(0,)) for index, name in enumerate(names)
        )
    ),
)


@given(TABLES)
def test_random_tables_decode_to_themselves(table):
    assert deserialize_tables(serialize_tables(table)) == table


def test_empty_table_has_no_sections():
    data = serialize_tables(ObjectPointerTable())

    assert len(data) == HEADER_SIZE
    assert deserialize_tables(data) == ObjectPointerTable()


def _corrupt(data: bytes, position: int, replacement: bytes) -> bytes:
    return data[:position] + replacement + data[position + len(replacement):]


@pytest.mark.parametrize(
    "mutate",
    [
        lambda data: _corrupt(data, 0, b"XXXX"),
        lambda data: _corrupt(data, 4, (2).to_bytes(2, "little")),
        lambda data: data[:HEADER_SIZE - 1],
        lambda data: data[:-3],
        lambda data: data + b"\x00",
        lambda data: _corrupt(data, 24, (4).to_bytes(4, "little")) + SECTION_HEADER.pack(9, 1) + b"\x90",
    ],
    ids=["magic", "version", "short-header", "truncated-section", "trailing-bytes", "unknown-section"],
)
def test_malformed_metadata_is_rejected(mutate, motivation_compiled):
    data = serialize_tables(motivation_compiled.metadata)

    with pytest.raises(MetadataFormatError) as error:
        deserialize_tables(mutate(data))

    assert error.value.exit_code == 5
