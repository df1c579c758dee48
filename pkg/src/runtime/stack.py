import itertools
import logging
import threading
from dataclasses import dataclass, field
from typing import Optional

from src.exceptions import UnknownFrameError
from src.runtime.memory import RangeAllocator

logger = logging.getLogger(__name__)


@dataclass
class Frame:
    token: int
    function_id: int
    thread: int
    start: int
    span: int
    slot_addresses: tuple[int, ...] = ()
    slot_sizes: tuple[int, ...] = ()
    exited: bool = False

    def slot_range(self, slot_id: int) -> tuple[int, int]:
        start = self.slot_addresses[slot_id]
        return start, start + self.slot_sizes[slot_id]


@dataclass
class _ThreadStack:
    frames: list[Frame] = field(default_factory=list)


class DedicatedStack:
    """
    Frames holding every address-taken stack slot.

    The application pushes frames and pops them from its call stack, but a
    popped frame stays registered (and scanned by the sweeper) until
    ``reclaim`` runs for its token.
    """

    def __init__(self, allocator: RangeAllocator, pointer_size: int = 8):
        self.allocator = allocator
        self.pointer_size = pointer_size
        self._threads: dict[int, _ThreadStack] = {}
        self._registered: dict[int, Frame] = {}
        self._by_function: dict[int, dict[int, Frame]] = {}
        self._tokens = itertools.count(1)
        self._lock = threading.RLock()
        self.frames_reclaimed = 0

    def enter(self, thread: int, function_id: int, slot_sizes: tuple[int, ...]) -> Optional[Frame]:
        addresses = []
        offset = 0
        for size in slot_sizes:
            addresses.append(offset)
            offset += -(-size // self.pointer_size) * self.pointer_size
        start = self.allocator.reserve(max(offset, 1))
        if start is None:
            return None
        with self._lock:
            frame = Frame(
                token=next(self._tokens),
                function_id=function_id,
                thread=thread,
                start=start,
                span=max(offset, 1),
                slot_addresses=tuple(start + a for a in addresses),
                slot_sizes=tuple(slot_sizes),
            )
            self._threads.setdefault(thread, _ThreadStack()).frames.append(frame)
            self._registered[frame.token] = frame
            self._by_function.setdefault(function_id, {})[frame.token] = frame
        return frame

    def exit(self, thread: int, token: int) -> Frame:
        """
        Pop ``token`` from the thread's call stack; it must be the innermost
        frame of that thread.
        """
        with self._lock:
            stack = self._threads.get(thread)
            if stack is None or not stack.frames or stack.frames[-1].token != token:
                raise UnknownFrameError(f"Frame {token} is not the innermost frame of thread {thread}")
            frame = stack.frames.pop()
            frame.exited = True
            return frame

    def reclaim(self, token: int) -> Optional[Frame]:
        with self._lock:
            frame = self._registered.pop(token, None)
            if frame is None:
                return None
            self._by_function[frame.function_id].pop(token, None)
            self.frames_reclaimed += 1
        self.allocator.release(frame.start, frame.span)
        return frame

    def live_frames(self, function_id: int) -> list[Frame]:
        with self._lock:
            return list(self._by_function.get(function_id, {}).values())

    def is_registered(self, token: int) -> bool:
        with self._lock:
            return token in self._registered

    def depth(self, thread: int) -> int:
        with self._lock:
            stack = self._threads.get(thread)
            return len(stack.frames) if stack else 0

    def __len__(self) -> int:
        with self._lock:
            return len(self._registered)
