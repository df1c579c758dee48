import threading

import pytest
from hypothesis import given, settings as hypothesis_settings
from hypothesis import strategies as st

from src.config.settings import Settings
from src.exceptions import ConfigurationError, MetadataMismatchError, UnknownFrameError
from src.metadata.records import ObjectPointerTable
from src.runtime.events import AllocEvent, EventQueue, FreeEvent
from src.runtime.interpreter import Interpreter, interp_run
from src.runtime.machine import Machine
from src.runtime.memory import AddressSpace, RangeAllocator, RuntimeObjectRecord
from src.runtime.registry import AllocationRegistry
from src.runtime.stack import DedicatedStack
from src.schemas.runtime import FaultKind, ProtectionMode
from src.tests.oracles import LinearRegistry

NO_FREE = """
type Node = struct { value: i64, next: ptr }
global @head : ptr

define @link(%n, %m) {
  %next = field %n, Node.next
  store %m, %next
  ret %n
}

define @main() {
  %a = malloc 16
  %b = malloc 16
  store 5, %b
  %l = call @link(%a, %b)
  %g = copy @head
  store %l, %g
  %x = load %g
  %y = field %x, Node.next
  %z = load %y
  %v = load %z
  ret %v
}
"""


def test_address_space_cells():
    memory = AddressSpace()
    memory.write(0x100, 7)

    assert memory.read(0x100) == 7
    assert memory.read(0x108) == 0
    assert not memory.null_if_within(0x100, 0, 7)
    assert memory.null_if_within(0x100, 0, 8)
    assert memory.read(0x100) == 0
    memory.write(0x200, 1)
    memory.write(0x200, 0)
    assert memory.snapshot() == {}


def test_allocator_aligns_and_reuses_released_ranges():
    allocator = RangeAllocator(0x1000, 0x2000, 16)
    first = allocator.reserve(10)
    second = allocator.reserve(17)

    assert (first, second) == (0x1000, 0x1010)
    assert allocator.reserved_bytes == 48
    allocator.quarantine(first, 10)
    assert allocator.is_quarantined(first + 8)
    assert allocator.reserve(16) == 0x1030
    allocator.release(first, 10)
    assert not allocator.is_quarantined(first)
    assert allocator.reserve(8) == first
    assert allocator.peak_bytes == 64
    assert allocator.quarantine_violations == 0


def test_allocator_counts_quarantine_violations_and_exhaustion():
    allocator = RangeAllocator(0x1000, 0x1040, 16)
    allocator.quarantine(0x1000, 16)

    assert allocator.reserve(64) == 0x1000
    assert allocator.quarantine_violations == 1
    assert allocator.reserve(1) is None


def test_registry_lookup_and_overlap_count():
    registry = AllocationRegistry()
    registry.insert(RuntimeObjectRecord(start=0x100, end=0x120, size=32, static_id=1))
    registry.insert(RuntimeObjectRecord(start=0x140, end=0x150, size=16, static_id=2))

    assert registry.lookup(0x11F).static_id == 1
    assert registry.lookup(0x120) is None
    assert registry.get(0x140).static_id == 2
    assert registry.overlap_violations == 0
    registry.insert(RuntimeObjectRecord(start=0x130, end=0x148, size=24, static_id=3))
    assert registry.overlap_violations == 1
    assert registry.remove(0x100).static_id == 1
    assert registry.remove(0x100) is None
    assert len(registry) == 2


@hypothesis_settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.integers(min_value=1, max_value=96)), min_size=1, max_size=60), st.data())
def test_registry_agrees_with_linear_scan(operations, data):
    allocator = RangeAllocator(0x1000, 0x10_0000, 16)
    registry = AllocationRegistry()
    oracle = LinearRegistry()
    live: list[RuntimeObjectRecord] = []
    for allocate, size in operations:
        if allocate or not live:
            start = allocator.reserve(size)
            record = RuntimeObjectRecord(start=start, end=start + size, size=size, static_id=size)
            registry.insert(record)
            oracle.insert(record)
            live.append(record)
        else:
            record = live.pop(data.draw(st.integers(min_value=0, max_value=len(live) - 1)))
            allocator.release(record.start, record.size)
            assert registry.remove(record.start) == oracle.remove(record.start)
        address = data.draw(st.integers(min_value=0x1000 - 16, max_value=0x1000 + 60 * 96 + 16))
        assert registry.lookup(address) == oracle.lookup(address)
    assert registry.overlap_violations == 0


def test_event_queue_orders_and_acknowledges():
    queue = EventQueue()
    record = RuntimeObjectRecord(start=0x100, end=0x110, size=16, static_id=1)

    assert queue.put(AllocEvent(record)) == 0
    assert queue.put(FreeEvent(record)) == 1
    assert queue.depth == 2
    seq, event = queue.get(timeout=0.1)
    assert (seq, event) == (0, AllocEvent(record))
    queue.mark_processed(seq)
    assert queue.wait_processed(0, timeout=0.1)
    assert not queue.wait_processed(1, timeout=0.01)
    assert queue.get(timeout=0.1)[0] == 1
    assert queue.get(timeout=0.01) is None
    assert queue.get_stats() == {"enqueue_count": 2, "dequeue_count": 2, "depth": 0, "max_depth": 2}


def test_closing_the_queue_releases_waiters():
    queue = EventQueue()
    seq = queue.put(AllocEvent(RuntimeObjectRecord(start=0, end=16, size=16, static_id=1)))
    released = []
    waiter = threading.Thread(target=lambda: released.append(queue.wait_processed(seq, timeout=5)))
    waiter.start()
    queue.close()
    waiter.join()

    assert released == [True]


def test_dedicated_stack_keeps_frames_until_reclaimed():
    stack = DedicatedStack(RangeAllocator(0x100_0000, 0x100_1000, 8))
    outer = stack.enter(0, function_id=1, slot_sizes=(8, 12))
    inner = stack.enter(0, function_id=2, slot_sizes=())

    assert outer.slot_addresses == (outer.start, outer.start + 8)
    assert outer.slot_range(1) == (outer.start + 8, outer.start + 20)
    with pytest.raises(UnknownFrameError):
        stack.exit(0, outer.token)
    stack.exit(0, inner.token)
    assert stack.depth(0) == 1
    assert stack.is_registered(inner.token)
    assert stack.live_frames(2) == [inner]
    assert stack.reclaim(inner.token) is inner
    assert stack.reclaim(inner.token) is None
    assert stack.live_frames(2) == []
    assert stack.frames_reclaimed == 1


def test_function_addresses(settings):
    machine = Machine(settings)
    machine.function_names = ["helper", "main"]

    assert machine.function_address(1) == settings.TEXT_BASE + 16
    assert machine.function_at(settings.TEXT_BASE + 16) == "main"
    assert machine.function_at(settings.TEXT_BASE + 8) is None
    assert machine.function_at(settings.TEXT_BASE + 64) is None


def test_unprotected_motivation_reads_freed_memory(motivation, settings):
    report = interp_run(motivation, None, ProtectionMode.UNPROTECTED, settings)

    assert report.faults == []
    assert report.completed
    assert report.return_values == [42]
    assert [stale.operation for stale in report.stale_accesses] == ["load"]
    assert report.sweep is None


def test_protected_motivation_traps_on_null(motivation, motivation_compiled, settings):
    report = interp_run(motivation, motivation_compiled.metadata, ProtectionMode.PROTECTED, settings)

    assert report.stale_accesses == []
    assert report.trapped_on_null
    assert not report.completed
    assert [fault.kind for fault in report.traps] == [FaultKind.NULL_DEREFERENCE]
    assert report.sweep.nullified_heap == 1
    assert report.sweep.nullified_stack == 1
    assert report.nullified == 2
    assert report.metadata_bytes > 0


def test_heap_and_global_only_still_nulls_the_heap_cell(motivation, motivation_compiled, settings):
    report = interp_run(
        motivation, motivation_compiled.metadata, ProtectionMode.PROTECTED, settings, stack_pointers=False
    )

    assert report.trapped_on_null
    assert report.sweep.nullified_stack == 0
    assert report.nullified == 1


def test_protected_run_needs_matching_metadata(motivation, parse, settings):
    with pytest.raises(ConfigurationError):
        Interpreter(motivation, None, ProtectionMode.PROTECTED, settings)
    with pytest.raises(MetadataMismatchError):
        Interpreter(motivation, ObjectPointerTable(), ProtectionMode.PROTECTED, settings)
    with pytest.raises(ConfigurationError):
        Interpreter(parse(""), None, ProtectionMode.UNPROTECTED, settings)


def test_runs_without_free_behave_identically(compile_source, settings):
    compiled = compile_source(NO_FREE)
    plain = interp_run(compiled.module, None, ProtectionMode.UNPROTECTED, settings)
    guarded = interp_run(compiled.module, compiled.metadata, ProtectionMode.PROTECTED, settings)

    assert plain.return_values == guarded.return_values == [5]
    assert plain.trace_digest == guarded.trace_digest
    assert plain.instructions == guarded.instructions
    assert guarded.hook_calls > plain.hook_calls == 0


def test_simulated_cost_model(compile_source, settings):
    compiled = compile_source(NO_FREE)
    report = interp_run(compiled.module, compiled.metadata, ProtectionMode.PROTECTED, settings)

    assert report.simulated_cost == (
        report.instructions * settings.INSTRUCTION_COST
        + report.hook_calls * settings.HOOK_COST
        + report.events * settings.EVENT_COST
    )
    assert report.peak_memory >= report.metadata_bytes + 32


def test_threads_and_iterations(compile_source, settings):
    compiled = compile_source(NO_FREE)
    report = interp_run(
        compiled.module, compiled.metadata, ProtectionMode.PROTECTED, settings, threads=3, iterations=2
    )

    assert report.return_values == [5] * 6
    assert report.allocations == 12
    assert report.frame_entries == 12


@pytest.mark.parametrize(
    "body, kind",
    [
        ("  %a = malloc 8\n  call @free(%a)\n  call @free(%a)\n  ret\n", FaultKind.DOUBLE_FREE),
        ("  %a = malloc 16\n  %b = field %a, *, 8\n  call @free(%b)\n  ret\n", FaultKind.INVALID_FREE),
    ],
)
def test_bad_frees_are_reported_not_trapped(body, kind, compile_source, settings):
    compiled = compile_source(f"define @main() {{\n{body}}}\n")
    for mode, metadata in ((ProtectionMode.UNPROTECTED, None), (ProtectionMode.PROTECTED, compiled.metadata)):
        report = interp_run(compiled.module, metadata, mode, settings)
        assert [fault.kind for fault in report.faults] == [kind]
        assert report.completed
        assert report.traps == []


@pytest.mark.parametrize(
    "body, kind",
    [
        ("  %p = copy 0x5000\n  %v = load %p\n  ret\n", FaultKind.UNMAPPED_ACCESS),
        ("  %p = copy 8\n  store 1, %p\n  ret\n", FaultKind.NULL_DEREFERENCE),
        ("  %f = copy null\n  call %f()\n  ret\n", FaultKind.NULL_DEREFERENCE),
        ("  %f = copy 0x5000\n  call %f()\n  ret\n", FaultKind.BAD_CALL),
        ("  %a = malloc 64\n  ret\n", FaultKind.OUT_OF_MEMORY),
        ("  call @main()\n  ret\n", FaultKind.CALL_DEPTH),
    ],
)
def test_runtime_faults(body, kind, parse):
    settings = Settings(HEAP_LIMIT=0x1_0000_0020, MAX_CALL_DEPTH=8)
    report = interp_run(parse(f"define @main() {{\n{body}}}\n"), None, ProtectionMode.UNPROTECTED, settings)

    assert [fault.kind for fault in report.faults] == [kind]
    assert not report.completed


def test_summary_lines(motivation, settings):
    report = interp_run(motivation, None, ProtectionMode.UNPROTECTED, settings)
    lines = report.summary_lines()

    assert lines[0] == "mode: unprotected"
    assert "stale accesses: 1" in lines
    assert any(line.startswith("stale load main:") for line in lines)
