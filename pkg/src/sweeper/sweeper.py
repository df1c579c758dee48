import logging
import threading
from typing import Optional

from src.exceptions import ConfigurationError
from src.metadata.builder import expand_any_field
from src.metadata.records import GlobalRecord, HeapFieldRecord, ObjectPointerTable, StackRecord
from src.runtime.events import AllocEvent, FrameExitEvent, FreeEvent, ShutdownEvent, SweeperEvent
from src.runtime.machine import Machine
from src.runtime.memory import RuntimeObjectRecord
from src.schemas.runtime import SweepReport
from src.sweeper.grouping import StaticGrouping

logger = logging.getLogger(__name__)


class Sweeper:
    """
    Consumer side of the event queue: keeps the static grouping current,
    nulls every metadata-covered cell pointing into a freed object, then
    releases the object's quarantined range and reclaims exited frames.
    """

    def __init__(self, machine: Machine, metadata: ObjectPointerTable, stack_pointers: bool = True):
        self.machine = machine
        self.metadata = metadata
        self.stack_pointers = stack_pointers
        self.grouping = StaticGrouping()
        self.report = SweepReport()
        self.error: Optional[Exception] = None
        self._globals = {layout.index: layout for layout in metadata.globals}
        self._functions = {layout.function_id: layout for layout in metadata.functions}
        self._thread: Optional[threading.Thread] = None

    def start(self) -> None:
        self._thread = threading.Thread(target=self.run, name="sweeper", daemon=True)
        self._thread.start()

    def stop(self) -> SweepReport:
        self.machine.queue.put(ShutdownEvent())
        if self._thread is not None:
            self._thread.join()
        if self.error is not None:
            raise self.error
        return self.report

    def run(self) -> SweepReport:
        queue = self.machine.queue
        poll = self.machine.settings.SWEEPER_POLL_SECONDS
        while True:
            item = queue.get(timeout=poll)
            if item is None:
                if queue.closed:
                    break
                continue
            seq, event = item
            if isinstance(event, ShutdownEvent):
                queue.mark_processed(seq)
                break
            try:
                self.handle(event)
            except Exception as exc:
                logger.error("Sweeper stopped: %s", exc, exc_info=not isinstance(exc, ConfigurationError))
                self.error = exc
                queue.close()
                break
            finally:
                self.report.events_processed += 1
                queue.mark_processed(seq)
        self.report.frames_reclaimed = self.machine.stack.frames_reclaimed
        return self.report

    def handle(self, event: SweeperEvent) -> None:
        if isinstance(event, AllocEvent):
            self.grouping.add(event.record)
            self.report.allocs_seen += 1
        elif isinstance(event, FreeEvent):
            self.handle_free(event.record)
        elif isinstance(event, FrameExitEvent):
            self.handle_frame_exit(event)

    def _null_cell(self, address: int, freed: RuntimeObjectRecord) -> bool:
        self.report.cells_scanned += 1
        if self.machine.memory.null_if_within(address, freed.start, freed.end):
            logger.debug("Nulled cell %#x pointing into %#x..%#x", address, freed.start, freed.end)
            return True
        return False

    def handle_free(self, record: RuntimeObjectRecord) -> list[int]:
        """
        Null every cell listed for ``record``'s static object that points
        into it, then release its range. Returns the nulled addresses.
        """
        if record.static_id not in self.metadata.objects:
            raise ConfigurationError(f"Metadata has no object with static id {record.static_id}")
        self.grouping.remove(record)
        pointer_size = self.machine.pointer_size
        nulled: list[int] = []

        for entry in self.metadata.objects[record.static_id]:
            if isinstance(entry, HeapFieldRecord):
                if entry.container_static_id not in self.metadata.objects:
                    raise ConfigurationError(f"Heap record names unknown object o{entry.container_static_id}")
                for container in self.grouping.members(entry.container_static_id):
                    if entry.any_field:
                        offsets = expand_any_field(self.metadata, entry.container_static_id, container.size)
                    else:
                        offsets = (entry.offset,)
                    for offset in offsets:
                        if offset + pointer_size > container.size:
                            continue
                        if self._null_cell(container.start + offset, record):
                            nulled.append(container.start + offset)
                            self.report.nullified_heap += 1
            elif isinstance(entry, GlobalRecord):
                layout = self._globals.get(entry.index)
                if layout is None or entry.index >= len(self.machine.global_addresses):
                    raise ConfigurationError(f"Global record names unknown index {entry.index}")
                base = self.machine.global_addresses[entry.index]
                for offset in layout.pointer_offsets:
                    if self._null_cell(base + offset, record):
                        nulled.append(base + offset)
                        self.report.nullified_global += 1
            elif isinstance(entry, StackRecord):
                if not self.stack_pointers:
                    continue
                function = self._functions.get(entry.function_id)
                if function is None or entry.slot_id >= len(function.slots):
                    raise ConfigurationError(
                        f"Stack record names unknown slot {entry.slot_id} of function {entry.function_id}"
                    )
                slot = function.slots[entry.slot_id]
                for frame in self.machine.stack.live_frames(entry.function_id):
                    if entry.slot_id >= len(frame.slot_addresses):
                        raise ConfigurationError(
                            f"Stack record names slot {entry.slot_id} but frames of function "
                            f"{entry.function_id} have {len(frame.slot_addresses)}"
                        )
                    self.report.stack_slots_scanned += 1
                    base = frame.slot_addresses[entry.slot_id]
                    for offset in slot.pointer_offsets:
                        if self._null_cell(base + offset, record):
                            nulled.append(base + offset)
                            self.report.nullified_stack += 1

        self.machine.heap.release(record.start, record.size)
        self.report.frees_processed += 1
        self.report.released_bytes += record.size
        return nulled

    def handle_frame_exit(self, event: FrameExitEvent) -> None:
        if self.machine.stack.reclaim(event.frame_token) is None:
            message = f"frame exit for unknown token {event.frame_token}"
            logger.warning("Sweeper: %s", message)
            self.report.diagnostics.append(message)
        else:
            self.report.frames_reclaimed = self.machine.stack.frames_reclaimed


def run_sweeper(machine: Machine, metadata: ObjectPointerTable, stack_pointers: bool = True) -> SweepReport:
    """
    Consume events on the calling thread until a shutdown marker arrives
    (or the queue is closed and drained).
    """
    sweeper = Sweeper(machine, metadata, stack_pointers)
    report = sweeper.run()
    if sweeper.error is not None:
        raise sweeper.error
    return report
