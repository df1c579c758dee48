import functools

import pytest
from hypothesis import given, settings as hypothesis_settings
from hypothesis import strategies as st

from src.analysis.objects import ObjectTable
from src.config.settings import Settings
from src.exceptions import ConfigurationError
from src.ir.parser import parse_module
from src.metadata.records import SlotLayout, StackRecord
from src.runtime.events import FrameExitEvent, FreeEvent
from src.runtime.hooks import ProtectedHooks
from src.runtime.interpreter import interp_run
from src.runtime.machine import Machine
from src.runtime.memory import RuntimeObjectRecord
from src.schemas.runtime import ProtectionMode
from src.sweeper import StaticGrouping, Sweeper, run_sweeper
from src.tests.oracles import covered_cells, replay_free
from src.toolchain import compile_module

SHARED = """
type Pair = struct { left: ptr, right: ptr }
global @keep : ptr

define @main() {
  %slot = alloca ptr
  %pair = malloc 16
  %x = malloc 8
  %l = field %pair, Pair.left
  store %x, %l
  %g = copy @keep
  store %x, %g
  store %x, %slot
  call @free(%x)
  ret
}
"""


class SweepFixture:
    """
    A machine holding one live ``Pair`` whose left field, the global and
    the stack slot all point at ``x``; ``right`` holds the same address
    without any metadata covering it.
    """

    def __init__(self, compiled, settings, stack_pointers=True):
        module = compiled.module
        self.metadata = compiled.metadata
        self.machine = Machine(settings)
        hooks = ProtectedHooks(self.machine, stack_pointers, "async")
        hooks.register_globals(module, self.metadata.global_index_map)
        objects = ObjectTable(module)
        self.frame = hooks.on_frame_enter(self.metadata.function_id_map["main"], (8,))
        self.pair = hooks.on_alloc(objects.site("main", 1).static_id, 16)
        self.x = hooks.on_alloc(objects.site("main", 2).static_id, 8)
        self.sweeper = Sweeper(self.machine, self.metadata, stack_pointers)
        self.drain()

        memory = self.machine.memory
        self.global_cell = self.machine.global_addresses[self.metadata.global_index_map["keep"]]
        self.slot_cell = self.frame.slot_addresses[0]
        for address in (self.pair, self.pair + 8, self.global_cell, self.slot_cell):
            memory.write(address, self.x)

    def drain(self):
        while (item := self.machine.queue.get(timeout=0.01)) is not None:
            self.sweeper.handle(item[1])

    def free_x(self):
        record = self.machine.registry.remove(self.x)
        self.machine.heap.quarantine(record.start, record.size)
        return record

    def expected(self, record):
        stack = self.machine.stack
        frames = {layout.function_id: stack.live_frames(layout.function_id) for layout in self.metadata.functions}
        cells = covered_cells(
            self.metadata,
            record.static_id,
            self.machine.registry.records(),
            self.machine.global_addresses,
            frames if self.sweeper.stack_pointers else {},
        )
        return replay_free(self.machine.memory.snapshot(), cells, record)


@pytest.fixture
def shared(compile_source):
    return compile_source(SHARED)


def test_free_nulls_exactly_the_covered_cells(shared, settings):
    fixture = SweepFixture(shared, settings)
    record = fixture.free_x()
    expected = fixture.expected(record)

    nulled = fixture.sweeper.handle_free(record)

    assert set(nulled) == expected
    assert {fixture.pair, fixture.global_cell, fixture.slot_cell} <= expected
    memory = fixture.machine.memory
    assert memory.read(fixture.pair) == memory.read(fixture.global_cell) == memory.read(fixture.slot_cell) == 0
    assert memory.read(fixture.pair + 8) == fixture.x
    assert not fixture.machine.heap.is_quarantined(fixture.x)

    report = fixture.sweeper.report
    assert report.nullified_global == 1
    assert report.nullified_stack == 1
    assert report.frees_processed == 1
    assert report.released_bytes == 8
    assert fixture.sweeper.grouping.members(record.static_id) == []


def test_stack_cells_survive_with_stack_pointers_off(shared, settings):
    fixture = SweepFixture(shared, settings, stack_pointers=False)
    record = fixture.free_x()
    expected = fixture.expected(record)

    nulled = fixture.sweeper.handle_free(record)

    assert set(nulled) == expected
    assert fixture.slot_cell not in expected
    assert fixture.machine.memory.read(fixture.slot_cell) == fixture.x
    assert fixture.sweeper.report.nullified_stack == 0


def test_exited_frames_stay_scanned_until_reclaimed(shared, settings):
    fixture = SweepFixture(shared, settings)
    stack = fixture.machine.stack
    stack.exit(0, fixture.frame.token)

    fixture.sweeper.handle_free(fixture.free_x())
    assert fixture.machine.memory.read(fixture.slot_cell) == 0

    fixture.sweeper.handle(FrameExitEvent(fixture.frame.function_id, fixture.frame.token))
    assert not stack.is_registered(fixture.frame.token)
    assert fixture.sweeper.report.frames_reclaimed == 1


def test_unknown_frame_token_is_a_diagnostic(shared, settings):
    fixture = SweepFixture(shared, settings)

    fixture.sweeper.handle_frame_exit(FrameExitEvent(0, 12345))

    assert fixture.sweeper.report.diagnostics == ["frame exit for unknown token 12345"]


def test_unknown_static_id_stops_the_sweeper(shared, settings):
    fixture = SweepFixture(shared, settings)
    bogus = RuntimeObjectRecord(start=fixture.x, end=fixture.x + 8, size=8, static_id=999)
    fixture.machine.queue.put(FreeEvent(bogus))

    with pytest.raises(ConfigurationError):
        run_sweeper(fixture.machine, fixture.metadata)
    assert fixture.machine.queue.closed


def test_sweeper_thread_processes_until_shutdown(shared, settings):
    fixture = SweepFixture(shared, settings)
    record = fixture.free_x()
    fixture.machine.queue.put(FreeEvent(record))
    fixture.sweeper.start()

    report = fixture.sweeper.stop()

    assert report.frees_processed == 1
    assert fixture.machine.memory.read(fixture.global_cell) == 0


def test_static_grouping():
    grouping = StaticGrouping()
    first = RuntimeObjectRecord(start=0x200, end=0x210, size=16, static_id=1)
    second = RuntimeObjectRecord(start=0x100, end=0x110, size=16, static_id=1)
    grouping.add(first)
    grouping.add(second)

    assert grouping.members(1) == [second, first]
    assert grouping.remove(first)
    assert not grouping.remove(first)
    assert grouping.snapshot() == {1: {second}}
    assert len(grouping) == 1
    assert grouping.members(2) == []


def _with_phantom_slot(metadata, static_id):
    main = metadata.function_id_map["main"]
    functions = []
    for layout in metadata.functions:
        if layout.function_id == main:
            extra = SlotLayout(slot_id=len(layout.slots), size=8, pointer_offsets=(0,))
            phantom = StackRecord(function_id=main, slot_id=extra.slot_id)
            layout = layout.model_copy(update={"slots": layout.slots + (extra,)})
        functions.append(layout)
    objects = dict(metadata.objects)
    objects[static_id] = objects[static_id] + (phantom,)
    return metadata.model_copy(update={"functions": tuple(functions), "objects": objects})


def test_stack_record_beyond_the_frame_stops_the_sweeper(shared, settings):
    fixture = SweepFixture(shared, settings)
    record = fixture.free_x()
    fixture.machine.queue.put(FreeEvent(record))

    with pytest.raises(ConfigurationError, match="slot 1"):
        run_sweeper(fixture.machine, _with_phantom_slot(fixture.metadata, record.static_id))
    assert fixture.machine.queue.closed


def test_unexpected_sweeper_error_closes_the_queue(shared, settings, monkeypatch):
    fixture = SweepFixture(shared, settings)

    def explode(record):
        raise RuntimeError("boom")

    monkeypatch.setattr(fixture.sweeper, "handle_free", explode)
    seq = fixture.machine.queue.put(FreeEvent(fixture.free_x()))
    fixture.sweeper.start()

    assert fixture.machine.queue.wait_processed(seq, timeout=5)
    assert fixture.machine.queue.closed
    with pytest.raises(RuntimeError, match="boom"):
        fixture.sweeper.stop()


TWO_FREES = """
define @main() {
  %slot = alloca ptr
  %a = malloc 8
  %b = malloc 8
  store %a, %slot
  call @free(%a)
  call @free(%b)
  ret
}
"""


def test_sync_run_with_inconsistent_metadata_fails_instead_of_hanging(compile_source, settings):
    compiled = compile_source(TWO_FREES)
    a = ObjectTable(compiled.module).site("main", 1).static_id
    metadata = _with_phantom_slot(compiled.metadata, a)

    with pytest.raises(ConfigurationError):
        interp_run(compiled.module, metadata, ProtectionMode.PROTECTED, settings)


@functools.lru_cache(maxsize=None)
def _shared_compiled():
    return compile_module(parse_module(SHARED))


class SweepTrace:
    """
    Drives a random sequence of allocations, stores, frees and frame changes
    through the hooks and a sweeper, comparing every free against an
    offline replay of the covered cells.
    """

    def __init__(self):
        compiled = _shared_compiled()
        self.metadata = compiled.metadata
        self.machine = Machine(
            Settings(SWEEP_MODE="async", STACK_POINTERS=True, APP_THREADS=1, SEED=0, LOG_LEVEL="WARNING")
        )
        self.hooks = ProtectedHooks(self.machine, True, "async")
        self.hooks.register_globals(compiled.module, self.metadata.global_index_map)
        objects = ObjectTable(compiled.module)
        self.pair_site = objects.site("main", 1).static_id
        self.x_site = objects.site("main", 2).static_id
        self.main_id = self.metadata.function_id_map["main"]
        self.sweeper = Sweeper(self.machine, self.metadata)
        self.global_cell = self.machine.global_addresses[self.metadata.global_index_map["keep"]]
        self.frames = []
        self.slots = []
        self.pairs = []
        self.live = []
        self.seen = []

    def drain(self):
        queue = self.machine.queue
        while queue.depth:
            self.sweeper.handle(queue.get(timeout=1)[1])

    def step(self, op, a, b):
        if op == "pair":
            self.pairs.append(self.hooks.on_alloc(self.pair_site, 16))
        elif op == "x":
            address = self.hooks.on_alloc(self.x_site, 8)
            self.live.append(address)
            self.seen.append(address)
        elif op == "enter":
            frame = self.hooks.on_frame_enter(self.main_id, (8,))
            self.frames.append(frame)
            self.slots.append(frame.slot_addresses[0])
        elif op == "exit" and self.frames:
            self.hooks.on_frame_exit(self.frames.pop().token)
        elif op == "store":
            cells = [self.global_cell, *self.slots]
            for pair in self.pairs:
                cells += [pair, pair + 8]
            value = self.seen[b % len(self.seen)] + b % 8 if self.seen else 0x1234
            self.machine.memory.write(cells[a % len(cells)], value)
        elif op == "free" and self.live:
            self.free(self.live.pop(a % len(self.live)))
        elif op == "free-pair" and self.pairs:
            self.free(self.pairs.pop(a % len(self.pairs)))
        self.drain()

    def free(self, address):
        machine = self.machine
        before = machine.memory.snapshot()
        record = machine.registry.remove(address)
        machine.heap.quarantine(record.start, record.size)
        cells = covered_cells(
            self.metadata,
            record.static_id,
            machine.registry.records(),
            machine.global_addresses,
            {self.main_id: machine.stack.live_frames(self.main_id)},
        )
        expected = replay_free(before, cells, record)

        nulled = self.sweeper.handle_free(record)

        assert sorted(nulled) == sorted(expected)
        assert machine.memory.snapshot() == {k: v for k, v in before.items() if k not in expected}
        assert not machine.heap.is_quarantined(address)


TRACE = st.lists(
    st.tuples(
        st.sampled_from(["pair", "x", "enter", "exit", "store", "free", "free-pair"]),
        st.integers(min_value=0, max_value=1000),
        st.integers(min_value=0, max_value=1000),
    ),
    max_size=60,
)


@given(TRACE)
@hypothesis_settings(max_examples=60, deadline=None)
def test_random_traces_null_exactly_what_an_offline_replay_would(trace):
    runner = SweepTrace()
    for op, a, b in trace:
        runner.step(op, a, b)

    report = runner.sweeper.report
    assert report.nullified_total == report.nullified_heap + report.nullified_global + report.nullified_stack
    assert len(runner.sweeper.grouping) == len(runner.machine.registry)
