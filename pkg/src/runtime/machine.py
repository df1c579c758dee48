import threading
from typing import Optional

from src.config.settings import Settings
from src.runtime.events import EventQueue
from src.runtime.memory import AddressSpace, RangeAllocator
from src.runtime.registry import AllocationRegistry
from src.runtime.stack import DedicatedStack

FUNCTION_STRIDE = 16


class Machine:
    """
    Shared state of one simulated process: memory, heap arena, registry,
    dedicated stack, event queue and the usage counters reports are built from.
    """

    def __init__(self, settings: Settings):
        self.settings = settings
        self.pointer_size = settings.POINTER_SIZE
        self.memory = AddressSpace()
        self.heap = RangeAllocator(settings.HEAP_BASE, settings.HEAP_LIMIT, settings.ALLOC_ALIGNMENT)
        self.stack_memory = RangeAllocator(settings.STACK_BASE, settings.STACK_LIMIT, settings.POINTER_SIZE)
        self.stack = DedicatedStack(self.stack_memory, settings.POINTER_SIZE)
        self.registry = AllocationRegistry()
        self.queue = EventQueue()

        self.global_addresses: list[int] = []
        self.global_ranges: list[tuple[int, int, str]] = []
        self.globals_end = settings.GLOBAL_BASE
        self.function_names: list[str] = []

        self.lock = threading.Lock()
        self.freed_starts: set[int] = set()
        self.allocations = 0
        self.frees = 0
        self.frame_entries = 0
        self.hook_calls = 0
        self.events = 0
        self.peak_usage = 0

    def count(self, **deltas: int) -> None:
        with self.lock:
            for name, delta in deltas.items():
                setattr(self, name, getattr(self, name) + delta)

    def sample(self) -> None:
        usage = (
            self.heap.reserved_bytes
            + self.stack_memory.reserved_bytes
            + self.queue.depth * self.settings.EVENT_COST_BYTES
        )
        with self.lock:
            if usage > self.peak_usage:
                self.peak_usage = usage

    def function_address(self, function_id: int) -> int:
        return self.settings.TEXT_BASE + function_id * FUNCTION_STRIDE

    def function_at(self, address: int) -> Optional[str]:
        offset = address - self.settings.TEXT_BASE
        if offset < 0 or offset % FUNCTION_STRIDE:
            return None
        index = offset // FUNCTION_STRIDE
        return self.function_names[index] if index < len(self.function_names) else None

    def global_at(self, address: int) -> Optional[tuple[int, str]]:
        for start, end, name in self.global_ranges:
            if start <= address < end:
                return start, name
        return None

    def in_heap(self, address: int) -> bool:
        return self.heap.contains(address)

    def in_globals(self, address: int) -> bool:
        return self.settings.GLOBAL_BASE <= address < self.globals_end

    def in_stack(self, address: int) -> bool:
        return self.stack_memory.contains(address)
