import logging
from abc import ABC, abstractmethod
from typing import Optional

from src.exceptions import UnknownFrameError
from src.ir.module import Module
from src.runtime.events import AllocEvent, FrameExitEvent, FreeEvent
from src.runtime.machine import Machine
from src.runtime.memory import RuntimeObjectRecord
from src.runtime.stack import Frame
from src.schemas.runtime import FaultKind

logger = logging.getLogger(__name__)


class RuntimeHooks(ABC):
    """
    Instrumentation points the interpreter calls at allocation, release and
    function entry/exit.
    """

    def __init__(self, machine: Machine):
        self.machine = machine

    def _reserve(self, static_id: int, size: int) -> Optional[RuntimeObjectRecord]:
        machine = self.machine
        start = machine.heap.reserve(size)
        if start is None:
            return None
        machine.memory.zero(start, size)
        record = RuntimeObjectRecord(start=start, end=start + size, size=size, static_id=static_id)
        machine.registry.insert(record)
        with machine.lock:
            machine.freed_starts.discard(start)
        machine.count(allocations=1)
        return record

    def _take_live(self, address: int) -> tuple[Optional[RuntimeObjectRecord], Optional[FaultKind]]:
        machine = self.machine
        record = machine.registry.remove(address)
        if record is not None:
            with machine.lock:
                machine.freed_starts.add(address)
            machine.count(frees=1)
            return record, None
        with machine.lock:
            fault = FaultKind.DOUBLE_FREE if address in machine.freed_starts else FaultKind.INVALID_FREE
        logger.warning("Rejected free of %#x (%s)", address, fault.value)
        return None, fault

    @abstractmethod
    def on_alloc(self, static_id: int, size: int, thread: int = 0) -> Optional[int]:
        """
        Reserve ``size`` bytes for a run-time object of ``static_id``; None
        when the simulated heap is exhausted.
        """

    @abstractmethod
    def on_free(self, address: int, thread: int = 0) -> Optional[FaultKind]:
        """
        Release the allocation starting at ``address``; returns a fault kind
        for invalid or repeated frees.
        """

    @abstractmethod
    def on_frame_exit(self, token: int, thread: int = 0) -> Optional[FaultKind]:
        pass

    def on_frame_enter(self, function_id: int, slot_sizes: tuple[int, ...], thread: int = 0) -> Optional[Frame]:
        frame = self.machine.stack.enter(thread, function_id, slot_sizes)
        if frame is not None:
            self.machine.count(frame_entries=1)
            self.machine.sample()
        return frame

    def register_globals(self, module: Module, index_map: dict[str, int]) -> list[int]:
        """
        Lay out every global in index order and record its address in the
        global pointer array: ``array[i]`` is the global with index ``i``.
        """
        machine = self.machine
        by_name = module.global_map()
        cursor = machine.settings.GLOBAL_BASE
        addresses = [0] * len(index_map)
        ranges = []
        for name, index in sorted(index_map.items(), key=lambda item: item[1]):
            size = module.global_size(by_name[name])
            addresses[index] = cursor
            ranges.append((cursor, cursor + size, name))
            cursor += -(-size // machine.pointer_size) * machine.pointer_size
        machine.global_addresses = addresses
        machine.global_ranges = ranges
        machine.globals_end = cursor
        return addresses


class UnprotectedHooks(RuntimeHooks):
    """
    The uninstrumented program: free releases immediately, frames are popped
    by the application.
    """

    def on_alloc(self, static_id: int, size: int, thread: int = 0) -> Optional[int]:
        record = self._reserve(static_id, size)
        self.machine.sample()
        return record.start if record else None

    def on_free(self, address: int, thread: int = 0) -> Optional[FaultKind]:
        record, fault = self._take_live(address)
        if record is not None:
            self.machine.heap.release(record.start, record.size)
        return fault

    def on_frame_exit(self, token: int, thread: int = 0) -> Optional[FaultKind]:
        try:
            self.machine.stack.exit(thread, token)
        except UnknownFrameError:
            return FaultKind.UNKNOWN_FRAME
        self.machine.stack.reclaim(token)
        return None


class ProtectedHooks(RuntimeHooks):
    """
    Instrumented program: allocations are published to the sweeper, frees
    are deferred to it and, with stack pointers on, so is frame reclamation.
    In ``sync`` mode a free returns only after the sweeper has handled it.
    """

    def __init__(self, machine: Machine, stack_pointers: bool = True, sweep_mode: str = "sync"):
        super().__init__(machine)
        self.stack_pointers = stack_pointers
        self.sweep_mode = sweep_mode

    def _publish(self, event) -> int:
        seq = self.machine.queue.put(event)
        self.machine.count(events=1)
        self.machine.sample()
        return seq

    def on_alloc(self, static_id: int, size: int, thread: int = 0) -> Optional[int]:
        record = self._reserve(static_id, size)
        self.machine.count(hook_calls=1)
        if record is None:
            return None
        self._publish(AllocEvent(record, thread))
        return record.start

    def on_free(self, address: int, thread: int = 0) -> Optional[FaultKind]:
        self.machine.count(hook_calls=1)
        record, fault = self._take_live(address)
        if record is None:
            return fault
        self.machine.heap.quarantine(record.start, record.size)
        seq = self._publish(FreeEvent(record, thread))
        if self.sweep_mode == "sync":
            self.machine.queue.wait_processed(seq)
        return None

    def on_frame_enter(self, function_id: int, slot_sizes: tuple[int, ...], thread: int = 0) -> Optional[Frame]:
        if self.stack_pointers:
            self.machine.count(hook_calls=1)
        return super().on_frame_enter(function_id, slot_sizes, thread)

    def on_frame_exit(self, token: int, thread: int = 0) -> Optional[FaultKind]:
        try:
            frame = self.machine.stack.exit(thread, token)
        except UnknownFrameError:
            logger.warning("Frame exit with unknown token %d on thread %d", token, thread)
            return FaultKind.UNKNOWN_FRAME
        if not self.stack_pointers:
            self.machine.stack.reclaim(token)
            return None
        self.machine.count(hook_calls=1)
        self._publish(FrameExitEvent(frame.function_id, token, thread))
        return None
