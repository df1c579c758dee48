import hashlib
import logging
import threading
import time
from dataclasses import dataclass, field
from typing import Optional

from sortedcontainers import SortedDict

from src.analysis.objects import ObjectTable
from src.analysis.soundness import LocationKind, ObservedFact
from src.config.settings import Settings, get_settings
from src.exceptions import ConfigurationError, MetadataMismatchError
from src.ir.module import Function, Instruction, Module, Opcode, Operand, OperandKind
from src.ir.printer import module_hash
from src.metadata.builder import assign_function_ids, assign_global_indices
from src.metadata.codec import serialize_tables
from src.metadata.records import ObjectPointerTable
from src.runtime.hooks import ProtectedHooks, RuntimeHooks, UnprotectedHooks
from src.runtime.machine import Machine
from src.runtime.stack import Frame
from src.schemas.runtime import ExecutionReport, Fault, FaultKind, ProtectionMode, StaleAccess
from src.sweeper.sweeper import Sweeper

logger = logging.getLogger(__name__)


class Trap(Exception):
    def __init__(self, kind: FaultKind, address: Optional[int] = None, message: str = ""):
        super().__init__(message or kind.value)
        self.kind = kind
        self.address = address
        self.message = message


@dataclass
class Activation:
    function: Function
    frame: Frame
    registers: dict[str, int] = field(default_factory=dict)
    pc: int = 0
    result: Optional[str] = None


@dataclass(frozen=True)
class _CompiledFunction:
    function: Function
    function_id: int
    slot_sizes: tuple[int, ...]
    slot_of: dict[int, int]
    slot_sites: tuple[str, ...]
    field_offsets: dict[int, int]
    heap_sites: dict[int, int]


class Interpreter:
    """
    Executes a module on the simulated machine, playing either the
    instrumented (protected) or the original (unprotected) program.
    """

    def __init__(
        self,
        module: Module,
        metadata: Optional[ObjectPointerTable],
        mode: ProtectionMode = ProtectionMode.PROTECTED,
        settings: Optional[Settings] = None,
        stack_pointers: Optional[bool] = None,
        sweep_mode: Optional[str] = None,
        threads: Optional[int] = None,
        iterations: int = 1,
        observe: bool = False,
    ):
        self.module = module
        self.metadata = metadata
        self.mode = ProtectionMode(mode)
        self.settings = settings or get_settings()
        self.stack_pointers = self.settings.STACK_POINTERS if stack_pointers is None else stack_pointers
        self.sweep_mode = sweep_mode or self.settings.SWEEP_MODE
        self.threads = threads or self.settings.APP_THREADS
        self.iterations = iterations
        self.observe = observe

        if module.entry not in module.function_map():
            raise ConfigurationError(f"Module has no entry function @{module.entry}")
        if self.mode == ProtectionMode.PROTECTED:
            if metadata is None:
                raise ConfigurationError("Protected runs need pointer metadata")
            if metadata.build_hash != module_hash(module):
                raise MetadataMismatchError("Metadata was built for a different module")

        self.machine = Machine(self.settings)
        self.objects = ObjectTable(module)
        self.hooks: RuntimeHooks
        self.sweeper: Optional[Sweeper] = None
        if self.mode == ProtectionMode.PROTECTED:
            self.hooks = ProtectedHooks(self.machine, self.stack_pointers, self.sweep_mode)
        else:
            self.hooks = UnprotectedHooks(self.machine)

        function_ids = assign_function_ids(module)
        self.machine.function_names = [func.name for func in module.functions]
        self.compiled = {func.name: self._compile(func, function_ids[func.name]) for func in module.functions}
        self.externals = module.external_map()

        self.faults: list[Fault] = []
        self.stale_accesses: list[StaleAccess] = []
        self.observed: set[ObservedFact] = set()
        self.return_values: list[Optional[int]] = []
        self.instructions = 0
        self._lock = threading.Lock()
        self._digest = hashlib.blake2b(digest_size=16)
        self._slot_sites: SortedDict = SortedDict()
        self._global_index: dict[str, int] = {}
        self._completed = True

    def _compile(self, func: Function, function_id: int) -> _CompiledFunction:
        slot_sizes, slot_of, slot_sites, field_offsets, heap_sites = [], {}, [], {}, {}
        for index, inst in enumerate(func.body):
            if inst.kind == Opcode.STACK_GLOBAL_ALLOC:
                slot_of[index] = len(slot_sizes)
                slot_sizes.append(self.module.alloca_size(inst))
                slot_sites.append(self.objects.site(func.name, index).id)
            elif inst.kind == Opcode.FIELD and not inst.field_operand.unknown:
                path = inst.field_operand
                field_offsets[index] = self.module.types.offset_of(path.type_name, path.steps)
            elif (func.name, index) in self.objects.sites:
                heap_sites[index] = self.objects.site(func.name, index).static_id
        return _CompiledFunction(
            function=func,
            function_id=function_id,
            slot_sizes=tuple(slot_sizes),
            slot_of=slot_of,
            slot_sites=tuple(slot_sites),
            field_offsets=field_offsets,
            heap_sites=heap_sites,
        )

    # values

    def _value(self, act: Activation, operand: Operand) -> int:
        if operand.kind == OperandKind.REGISTER:
            return act.registers.get(operand.name, 0)
        if operand.kind == OperandKind.CONSTANT:
            return operand.value
        if operand.kind == OperandKind.NULL:
            return 0
        if operand.name in self.compiled:
            return self.machine.function_address(self.compiled[operand.name].function_id)
        return self.machine.global_addresses[self._global_index[operand.name]]

    def _describe(self, value: int) -> str:
        if value == 0:
            return "null"
        machine = self.machine
        if machine.in_heap(value):
            record = machine.registry.lookup(value)
            return f"o{record.static_id}+{value - record.start}" if record else "stale"
        if machine.in_globals(value):
            hit = machine.global_at(value)
            return f"@{hit[1]}+{value - hit[0]}" if hit else "global"
        if machine.in_stack(value):
            return "stack"
        name = machine.function_at(value)
        return f"@{name}" if name else str(value)

    def _trace(self, thread: int, act: Activation, index: int, value: Optional[int]) -> None:
        text = f"{thread}:{act.function.name}:{index}:{'none' if value is None else self._describe(value)};"
        with self._lock:
            self._digest.update(text.encode("utf-8"))

    def _assign(self, act: Activation, register: str, value: int) -> None:
        act.registers[register] = value
        if self.observe and self.machine.in_heap(value):
            record = self.machine.registry.lookup(value)
            if record is not None:
                fact = ObservedFact(
                    LocationKind.REGISTER, target=f"o{record.static_id}", function=act.function.name, register=register
                )
                with self._lock:
                    self.observed.add(fact)

    def _observe_store(self, address: int, value: int) -> None:
        machine = self.machine
        if not machine.in_heap(value):
            return
        target = machine.registry.lookup(value)
        if target is None:
            return
        container = None
        if machine.in_heap(address):
            record = machine.registry.lookup(address)
            if record is not None:
                container, offset = f"o{record.static_id}", address - record.start
        elif machine.in_globals(address):
            hit = machine.global_at(address)
            if hit is not None:
                container, offset = f"@{hit[1]}", address - hit[0]
        elif machine.in_stack(address):
            with self._lock:
                index = self._slot_sites.bisect_right(address)
                if index:
                    start, (end, site) = self._slot_sites.peekitem(index - 1)
                    if address < end:
                        container, offset = site, address - start
        if container is not None:
            fact = ObservedFact(LocationKind.CELL, target=f"o{target.static_id}", container=container, offset=offset)
            with self._lock:
                self.observed.add(fact)

    def _check_access(self, thread: int, act: Activation, index: int, address: int, operation: str) -> None:
        machine = self.machine
        if address < self.settings.NULL_PAGE_SIZE:
            raise Trap(FaultKind.NULL_DEREFERENCE, address, f"{operation} through null")
        if machine.in_heap(address):
            if machine.registry.lookup(address) is None:
                stale = StaleAccess(
                    operation=operation, function=act.function.name, index=index, address=address, thread=thread
                )
                with self._lock:
                    self.stale_accesses.append(stale)
            return
        if machine.in_globals(address) or machine.in_stack(address):
            return
        raise Trap(FaultKind.UNMAPPED_ACCESS, address, f"{operation} of unmapped memory")

    def _fault(self, kind: FaultKind, thread: int, act: Optional[Activation], index: Optional[int], **extra) -> None:
        fault = Fault(
            kind=kind,
            function=act.function.name if act else None,
            index=index,
            thread=thread,
            **extra,
        )
        logger.info("Fault %s at %s:%s on thread %d", kind.value, fault.function, index, thread)
        with self._lock:
            self.faults.append(fault)

    # frames

    def _enter(self, thread: int, depth: int, name: str, args: list[int], result: Optional[str]) -> Activation:
        if depth >= self.settings.MAX_CALL_DEPTH:
            raise Trap(FaultKind.CALL_DEPTH, message=f"call depth {depth} reached calling @{name}")
        compiled = self.compiled[name]
        frame = self.hooks.on_frame_enter(compiled.function_id, compiled.slot_sizes, thread)
        if frame is None:
            raise Trap(FaultKind.OUT_OF_MEMORY, message="dedicated stack exhausted")
        act = Activation(function=compiled.function, frame=frame, result=result)
        for param, value in zip(compiled.function.params, args):
            self._assign(act, param, value)
        if self.observe:
            with self._lock:
                for slot_id, site in enumerate(compiled.slot_sites):
                    start, end = frame.slot_range(slot_id)
                    self._slot_sites[start] = (end, site)
        return act

    def _leave(self, thread: int, act: Activation) -> None:
        if self.observe:
            with self._lock:
                for start in act.frame.slot_addresses:
                    self._slot_sites.pop(start, None)
        fault = self.hooks.on_frame_exit(act.frame.token, thread)
        if fault is not None:
            self._fault(fault, thread, act, None)

    # execution

    def execute(self, thread: int, name: str, args: list[int]) -> Optional[int]:
        """
        Run ``name`` to completion on logical thread ``thread``. Traps
        propagate as ``Trap`` after being recorded.
        """
        try:
            calls: list[Activation] = [self._enter(thread, 0, name, args, None)]
        except Trap as trap:
            self._fault(trap.kind, thread, None, None, message=trap.message)
            raise
        returned: Optional[int] = None
        while calls:
            act = calls[-1]
            body = act.function.body
            if act.pc >= len(body):
                value = None
            else:
                index = act.pc
                inst = body[index]
                act.pc += 1
                with self._lock:
                    self.instructions += 1
                try:
                    step = self._step(thread, act, index, inst, len(calls))
                except Trap as trap:
                    self._fault(trap.kind, thread, act, index, address=trap.address, message=trap.message)
                    raise
                if isinstance(step, Activation):
                    calls.append(step)
                    continue
                if step is _CONTINUE:
                    continue
                value = step
            calls.pop()
            self._leave(thread, act)
            self._trace(thread, act, -1, value)
            if calls:
                if act.result is not None:
                    self._assign(calls[-1], act.result, value or 0)
            else:
                returned = value
        return returned

    def _step(self, thread: int, act: Activation, index: int, inst: Instruction, depth: int):
        kind = inst.kind
        compiled = self.compiled[act.function.name]
        if kind == Opcode.STACK_GLOBAL_ALLOC:
            self._assign(act, inst.result, act.frame.slot_addresses[compiled.slot_of[index]])
        elif kind == Opcode.HEAP_ALLOC:
            self._assign(act, inst.result, self._allocate(thread, compiled.heap_sites[index], inst.size_operand))
        elif kind in (Opcode.COPY, Opcode.CAST):
            self._assign(act, inst.result, self._value(act, inst.operands[0]))
        elif kind == Opcode.PHI:
            first, second = inst.operands
            chosen = first if first.name in act.registers else second
            self._assign(act, inst.result, self._value(act, chosen))
        elif kind == Opcode.LOAD:
            address = self._value(act, inst.operands[0])
            self._check_access(thread, act, index, address, "load")
            value = self.machine.memory.read(address)
            self._trace(thread, act, index, value)
            self._assign(act, inst.result, value)
        elif kind == Opcode.STORE:
            value = self._value(act, inst.operands[0])
            address = self._value(act, inst.operands[1])
            self._check_access(thread, act, index, address, "store")
            if self.observe:
                self._observe_store(address, value)
            self.machine.memory.write(address, value)
        elif kind == Opcode.FIELD:
            base = self._value(act, inst.operands[0])
            if inst.field_operand.unknown:
                offset = self._value(act, inst.operands[1])
            else:
                offset = compiled.field_offsets[index]
            self._assign(act, inst.result, base + offset)
        elif kind == Opcode.CALL:
            return self._call(thread, act, index, inst, depth)
        elif kind == Opcode.RET:
            return self._value(act, inst.operands[0]) if inst.operands else None
        return _CONTINUE

    def _allocate(self, thread: int, static_id: int, size: int) -> int:
        address = self.hooks.on_alloc(static_id, max(size, 1), thread)
        if address is None:
            raise Trap(FaultKind.OUT_OF_MEMORY, message=f"heap exhausted allocating {size} bytes")
        return address

    def _call(self, thread: int, act: Activation, index: int, inst: Instruction, depth: int):
        args = [self._value(act, arg) for arg in inst.arguments]
        if inst.is_free:
            fault = self.hooks.on_free(args[0], thread)
            if fault is not None:
                self._fault(fault, thread, act, index, address=args[0])
            return _CONTINUE
        callee = inst.callee
        if callee.is_symbol and callee.name in self.externals:
            compiled = self.compiled[act.function.name]
            address = self._allocate(thread, compiled.heap_sites[index], self.settings.EXTERNAL_ALLOC_SIZE)
            if inst.result is not None:
                self._assign(act, inst.result, address)
            return _CONTINUE
        if callee.is_symbol:
            name = callee.name
        else:
            target = self._value(act, callee)
            name = self.machine.function_at(target)
            if name is None:
                if target < self.settings.NULL_PAGE_SIZE:
                    raise Trap(FaultKind.NULL_DEREFERENCE, target, "call through null")
                raise Trap(FaultKind.BAD_CALL, target, "call target is not a function")
        func = self.compiled[name].function
        if len(func.params) != len(args):
            raise Trap(FaultKind.BAD_CALL, message=f"@{name} expects {len(func.params)} arguments, got {len(args)}")
        return self._enter(thread, depth, name, args, inst.result)

    # driver

    def _thread_main(self, thread: int, errors: list[BaseException]) -> None:
        try:
            for _ in range(self.iterations):
                args = [0] * len(self.module.function(self.module.entry).params)
                value = self.execute(thread, self.module.entry, args)
                with self._lock:
                    self.return_values.append(value)
        except Trap:
            self._completed = False
        except BaseException as exc:
            errors.append(exc)

    def run(self) -> ExecutionReport:
        settings = self.settings
        started = time.perf_counter()
        if self.mode == ProtectionMode.PROTECTED:
            index_map = self.metadata.global_index_map
        else:
            index_map = assign_global_indices(self.module)
        self._global_index = index_map
        self.hooks.register_globals(self.module, index_map)

        metadata_bytes = 0
        if self.mode == ProtectionMode.PROTECTED:
            metadata_bytes = len(serialize_tables(self.metadata))
            self.sweeper = Sweeper(self.machine, self.metadata, self.stack_pointers)
            self.sweeper.start()

        errors: list[BaseException] = []
        if self.threads == 1:
            self._thread_main(0, errors)
        else:
            workers = [
                threading.Thread(target=self._thread_main, args=(thread, errors), name=f"app-{thread}")
                for thread in range(self.threads)
            ]
            for worker in workers:
                worker.start()
            for worker in workers:
                worker.join()

        sweep_report = self.sweeper.stop() if self.sweeper is not None else None
        if errors:
            raise errors[0]
        elapsed = time.perf_counter() - started

        machine = self.machine
        simulated_cost = (
            self.instructions * settings.INSTRUCTION_COST
            + machine.hook_calls * settings.HOOK_COST
            + machine.events * settings.EVENT_COST
        )
        report = ExecutionReport(
            mode=self.mode,
            stack_pointers=self.stack_pointers,
            sweep_mode=self.sweep_mode,
            threads=self.threads,
            iterations=self.iterations,
            completed=self._completed,
            return_values=self.return_values,
            faults=self.faults,
            stale_accesses=self.stale_accesses,
            instructions=self.instructions,
            allocations=machine.allocations,
            frees=machine.frees,
            frame_entries=machine.frame_entries,
            hook_calls=machine.hook_calls,
            events=machine.events,
            simulated_cost=simulated_cost,
            peak_memory=machine.peak_usage + metadata_bytes,
            metadata_bytes=metadata_bytes,
            quarantine_violations=machine.heap.quarantine_violations,
            wall_time_seconds=elapsed,
            trace_digest=self._digest.hexdigest(),
            sweep=sweep_report,
        )
        logger.info(
            "Run finished (%s): %d instructions, %d faults, %d stale accesses",
            self.mode.value,
            report.instructions,
            len(report.faults),
            len(report.stale_accesses),
        )
        return report


_CONTINUE = object()


def interp_run(
    module: Module,
    metadata: Optional[ObjectPointerTable],
    mode: ProtectionMode = ProtectionMode.PROTECTED,
    settings: Optional[Settings] = None,
    **options,
) -> ExecutionReport:
    return Interpreter(module, metadata, mode, settings, **options).run()
