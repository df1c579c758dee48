import logging
import queue
import threading
from dataclasses import dataclass
from typing import Optional, Union

from src.runtime.memory import RuntimeObjectRecord

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AllocEvent:
    record: RuntimeObjectRecord
    thread: int = 0


@dataclass(frozen=True)
class FreeEvent:
    record: RuntimeObjectRecord
    thread: int = 0


@dataclass(frozen=True)
class FrameExitEvent:
    function_id: int
    frame_token: int
    thread: int = 0


@dataclass(frozen=True)
class ShutdownEvent:
    pass


SweeperEvent = Union[AllocEvent, FreeEvent, FrameExitEvent, ShutdownEvent]


class EventQueue:
    """
    Multi-producer, single-consumer FIFO between application threads and
    the sweeper. Every event gets a sequence number in queue order so a
    producer can wait until the consumer has handled its event.
    """

    def __init__(self):
        self._queue: queue.SimpleQueue = queue.SimpleQueue()
        self._put_lock = threading.Lock()
        self._processed = threading.Condition()
        self._next_seq = 0
        self._processed_seq = -1
        self.enqueue_count = 0
        self.dequeue_count = 0
        self.max_depth = 0
        self.closed = False

    def put(self, event: SweeperEvent) -> int:
        with self._put_lock:
            seq = self._next_seq
            self._next_seq += 1
            self._queue.put((seq, event))
            self.enqueue_count += 1
            self.max_depth = max(self.max_depth, self.depth)
            return seq

    def get(self, timeout: Optional[float] = None) -> Optional[tuple[int, SweeperEvent]]:
        try:
            item = self._queue.get(timeout=timeout)
        except queue.Empty:
            return None
        self.dequeue_count += 1
        return item

    def mark_processed(self, seq: int) -> None:
        with self._processed:
            self._processed_seq = seq
            self._processed.notify_all()

    def wait_processed(self, seq: int, timeout: Optional[float] = None) -> bool:
        with self._processed:
            return self._processed.wait_for(lambda: self._processed_seq >= seq or self.closed, timeout=timeout)

    def close(self) -> None:
        with self._processed:
            self.closed = True
            self._processed.notify_all()

    @property
    def depth(self) -> int:
        return self.enqueue_count - self.dequeue_count

    def get_stats(self) -> dict:
        return {
            "enqueue_count": self.enqueue_count,
            "dequeue_count": self.dequeue_count,
            "depth": self.depth,
            "max_depth": self.max_depth,
        }
