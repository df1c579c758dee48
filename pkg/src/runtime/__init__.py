from .events import AllocEvent, EventQueue, FrameExitEvent, FreeEvent, ShutdownEvent
from .hooks import ProtectedHooks, RuntimeHooks, UnprotectedHooks
from .machine import Machine
from .memory import AddressSpace, RangeAllocator, RuntimeObjectRecord
from .registry import AllocationRegistry
from .stack import DedicatedStack, Frame
