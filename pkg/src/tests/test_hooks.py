import pytest

from src.metadata.records import ANY_POINTER_FIELD, HeapFieldRecord, ObjectLayout, ObjectPointerTable
from src.runtime.events import AllocEvent, FreeEvent, ShutdownEvent
from src.runtime.hooks import ProtectedHooks, UnprotectedHooks
from src.runtime.machine import Machine
from src.schemas.runtime import FaultKind
from src.sweeper import Sweeper, run_sweeper

TWO_GLOBALS = """
global @first : ptr
global @second : i64

define @main() {
  ret
}
"""

NO_GLOBALS = """
define @main() {
  ret
}
"""


@pytest.fixture
def machine(settings):
    return Machine(settings)


@pytest.fixture
def hooks(machine):
    return ProtectedHooks(machine, stack_pointers=True, sweep_mode="async")


def drain(sweeper):
    while (item := sweeper.machine.queue.get(timeout=0.01)) is not None:
        sweeper.handle(item[1])


def test_allocations_from_one_site_are_disjoint(machine, hooks):
    first = hooks.on_alloc(3, 24)
    second = hooks.on_alloc(3, 24)
    tiny = hooks.on_alloc(3, 1)

    a, b, c = (machine.registry.get(start) for start in (first, second, tiny))
    assert a.static_id == b.static_id == c.static_id == 3
    assert a.end <= b.start or b.end <= a.start
    assert c.end == c.start + 1
    assert machine.queue.depth == 3
    _, event = machine.queue.get(timeout=0.01)
    assert event == AllocEvent(a)


def test_free_publishes_the_whole_record(machine, hooks):
    address = hooks.on_alloc(1, 8)
    record = machine.registry.get(address)
    machine.queue.get(timeout=0.01)

    assert hooks.on_free(address) is None
    assert machine.registry.get(address) is None
    assert machine.heap.is_quarantined(address)
    _, event = machine.queue.get(timeout=0.01)
    assert event == FreeEvent(record)


def test_repeated_and_invalid_frees_publish_nothing(machine, hooks):
    address = hooks.on_alloc(1, 8)
    hooks.on_free(address)
    depth = machine.queue.depth

    assert hooks.on_free(address) == FaultKind.DOUBLE_FREE
    assert hooks.on_free(0x1234) == FaultKind.INVALID_FREE
    assert machine.queue.depth == depth


def test_quarantined_range_is_not_handed_out_again(machine, hooks):
    address = hooks.on_alloc(1, 16)
    hooks.on_free(address)

    fresh = [hooks.on_alloc(1, 16) for _ in range(8)]

    assert all(start + 16 <= address or start >= address + 16 for start in fresh)
    assert machine.heap.quarantine_violations == 0


def test_unprotected_free_releases_immediately(machine):
    hooks = UnprotectedHooks(machine)
    address = hooks.on_alloc(1, 16)

    assert hooks.on_free(address) is None
    assert not machine.heap.is_quarantined(address)
    assert machine.queue.depth == 0


def test_enter_then_exit_reclaims_one_frame(machine, hooks):
    frame = hooks.on_frame_enter(0, (8, 16))
    assert hooks.on_frame_exit(frame.token) is None
    assert machine.stack.is_registered(frame.token)
    machine.queue.put(ShutdownEvent())

    report = run_sweeper(machine, ObjectPointerTable())

    assert report.frames_reclaimed == 1
    assert not machine.stack.is_registered(frame.token)


def test_deep_recursion_keeps_every_frame_until_the_sweeper_runs(machine, hooks):
    tokens = [hooks.on_frame_enter(0, (8,)).token for _ in range(100)]
    for token in reversed(tokens):
        assert hooks.on_frame_exit(token) is None

    assert machine.stack.depth(0) == 0
    assert len(machine.stack) == 100

    sweeper = Sweeper(machine, ObjectPointerTable())
    drain(sweeper)

    assert len(machine.stack) == 0
    assert machine.stack.frames_reclaimed == 100


@pytest.mark.parametrize("protected", [True, False])
def test_out_of_order_frame_exit_faults(protected, machine):
    hooks = ProtectedHooks(machine, sweep_mode="async") if protected else UnprotectedHooks(machine)
    outer = hooks.on_frame_enter(0, (8,))
    inner = hooks.on_frame_enter(1, (8,))

    assert hooks.on_frame_exit(outer.token) == FaultKind.UNKNOWN_FRAME
    assert hooks.on_frame_exit(inner.token) is None
    assert hooks.on_frame_exit(outer.token) is None


def test_frames_bypass_the_queue_with_stack_pointers_off(machine):
    hooks = ProtectedHooks(machine, stack_pointers=False, sweep_mode="async")
    frame = hooks.on_frame_enter(0, (8,))

    hooks.on_frame_exit(frame.token)

    assert not machine.stack.is_registered(frame.token)
    assert machine.queue.depth == 0


def test_register_two_globals(compile_source, machine, hooks):
    compiled = compile_source(TWO_GLOBALS)
    index_map = compiled.metadata.global_index_map

    addresses = hooks.register_globals(compiled.module, index_map)

    assert len(addresses) == 2
    assert len(set(addresses)) == 2
    for name, index in index_map.items():
        assert machine.global_at(addresses[index]) == (addresses[index], name)


def test_register_no_globals(compile_source, hooks):
    compiled = compile_source(NO_GLOBALS)

    assert hooks.register_globals(compiled.module, compiled.metadata.global_index_map) == []


def test_sweeper_without_events_reports_nothing(machine):
    machine.queue.put(ShutdownEvent())

    report = run_sweeper(machine, ObjectPointerTable())

    assert report.events_processed == 0
    assert report.nullified_total == 0
    assert report.released_bytes == 0


def test_any_field_sweep_touches_only_the_dangling_cell(machine, hooks):
    table = ObjectPointerTable(
        objects={
            1: (HeapFieldRecord(container_static_id=2, offset=ANY_POINTER_FIELD),),
            2: (),
            3: (),
        },
        object_layouts={2: ObjectLayout(static_id=2, typed=True, pointer_offsets=(0, 8, 16))},
    )
    container = hooks.on_alloc(2, 24)
    freed = hooks.on_alloc(1, 8)
    other = hooks.on_alloc(3, 8)
    sweeper = Sweeper(machine, table)
    drain(sweeper)

    memory = machine.memory
    memory.write(container, freed + 4)
    memory.write(container + 8, other)
    memory.write(container + 16, 0x1234)
    before = memory.snapshot()

    record = machine.registry.remove(freed)
    machine.heap.quarantine(record.start, record.size)
    nulled = sweeper.handle_free(record)

    after = memory.snapshot()
    assert nulled == [container]
    assert after.get(container, 0) == 0
    assert {k: v for k, v in before.items() if k != container} == after
    assert sweeper.report.cells_scanned == 3
    assert sweeper.report.nullified_heap == 1
    assert not machine.heap.is_quarantined(freed)
