import threading
from dataclasses import dataclass
from typing import Optional

from sortedcontainers import SortedDict


@dataclass(frozen=True)
class RuntimeObjectRecord:
    start: int
    end: int
    size: int
    static_id: int

    def __contains__(self, address: int) -> bool:
        return self.start <= address < self.end


class AddressSpace:
    """
    Simulated flat memory of 8-byte cells keyed by address; unwritten cells
    read as zero. Writes and the sweeper's compare-and-null share one lock.
    """

    def __init__(self):
        self._cells: dict[int, int] = {}
        self._lock = threading.Lock()

    def read(self, address: int) -> int:
        return self._cells.get(address, 0)

    def write(self, address: int, value: int) -> None:
        with self._lock:
            if value:
                self._cells[address] = value
            else:
                self._cells.pop(address, None)

    def null_if_within(self, address: int, start: int, end: int) -> bool:
        with self._lock:
            value = self._cells.get(address, 0)
            if start <= value < end:
                del self._cells[address]
                return True
            return False

    def zero(self, start: int, size: int) -> None:
        with self._lock:
            for address in range(start, start + size):
                self._cells.pop(address, None)

    def snapshot(self) -> dict[int, int]:
        with self._lock:
            return dict(self._cells)


def _round_up(value: int, alignment: int) -> int:
    return (value + alignment - 1) // alignment * alignment


class RangeAllocator:
    """
    Bump allocator over ``[base, limit)`` with a first-fit free list.

    Freed ranges enter quarantine first and only reach the free list through
    ``release``; a reservation overlapping a quarantined range counts as a
    violation.
    """

    def __init__(self, base: int, limit: int, alignment: int):
        self.base = base
        self.limit = limit
        self.alignment = alignment
        self._next = base
        self._free: SortedDict = SortedDict()
        self._quarantine: SortedDict = SortedDict()
        self._lock = threading.Lock()
        self.reserved_bytes = 0
        self.peak_bytes = 0
        self.quarantine_violations = 0

    def span(self, size: int) -> int:
        return _round_up(max(size, 1), self.alignment)

    def reserve(self, size: int) -> Optional[int]:
        span = self.span(size)
        with self._lock:
            start = None
            for free_start, free_span in self._free.items():
                if free_span >= span:
                    start = free_start
                    del self._free[free_start]
                    if free_span > span:
                        self._free[free_start + span] = free_span - span
                    break
            if start is None:
                if self._next + span > self.limit:
                    return None
                start = self._next
                self._next += span
            if self._overlaps_quarantine(start, start + span):
                self.quarantine_violations += 1
            self.reserved_bytes += span
            self.peak_bytes = max(self.peak_bytes, self.reserved_bytes)
            return start

    def _overlaps_quarantine(self, start: int, end: int) -> bool:
        index = self._quarantine.bisect_right(start)
        if index > 0:
            q_start = self._quarantine.keys()[index - 1]
            if q_start + self._quarantine[q_start] > start:
                return True
        return index < len(self._quarantine) and self._quarantine.keys()[index] < end

    def quarantine(self, start: int, size: int) -> None:
        with self._lock:
            self._quarantine[start] = self.span(size)

    def is_quarantined(self, address: int) -> bool:
        with self._lock:
            index = self._quarantine.bisect_right(address)
            if index == 0:
                return False
            q_start = self._quarantine.keys()[index - 1]
            return address < q_start + self._quarantine[q_start]

    def quarantined_bytes(self) -> int:
        with self._lock:
            return sum(self._quarantine.values())

    def release(self, start: int, size: int) -> None:
        span = self.span(size)
        with self._lock:
            self._quarantine.pop(start, None)
            self._free[start] = span
            self.reserved_bytes -= span

    def contains(self, address: int) -> bool:
        return self.base <= address < self.limit
