import threading
from typing import Optional

from sortedcontainers import SortedDict

from src.runtime.memory import RuntimeObjectRecord


class AllocationRegistry:
    """
    Live allocations ordered by start address. Safe for concurrent
    producers and the sweeper.
    """

    def __init__(self):
        self._records: SortedDict = SortedDict()
        self._lock = threading.RLock()
        self.overlap_violations = 0

    def insert(self, record: RuntimeObjectRecord) -> None:
        with self._lock:
            neighbour = self._lookup(record.start)
            index = self._records.bisect_left(record.start)
            following = self._records.peekitem(index)[1] if index < len(self._records) else None
            if neighbour is not None or (following is not None and following.start < record.end):
                self.overlap_violations += 1
            self._records[record.start] = record

    def remove(self, start: int) -> Optional[RuntimeObjectRecord]:
        with self._lock:
            return self._records.pop(start, None)

    def get(self, start: int) -> Optional[RuntimeObjectRecord]:
        with self._lock:
            return self._records.get(start)

    def lookup(self, address: int) -> Optional[RuntimeObjectRecord]:
        with self._lock:
            return self._lookup(address)

    def _lookup(self, address: int) -> Optional[RuntimeObjectRecord]:
        index = self._records.bisect_right(address)
        if index == 0:
            return None
        record = self._records.peekitem(index - 1)[1]
        return record if address < record.end else None

    def records(self) -> list[RuntimeObjectRecord]:
        with self._lock:
            return list(self._records.values())

    def __len__(self) -> int:
        with self._lock:
            return len(self._records)
