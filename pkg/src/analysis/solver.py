import logging
from collections import defaultdict, deque
from typing import Iterable, Optional

from src.analysis.objects import (
    STAR,
    AbstractObject,
    FieldObject,
    Node,
    ObjectTable,
    Offset,
    RegisterVar,
    SiteKind,
    SymbolVar,
    Target,
)
from src.analysis.state import CallSite, Diagnostic, PointsToState
from src.ir.module import Function, Instruction, Module, Opcode, Operand, OperandKind

logger = logging.getLogger(__name__)

FUNCTION_TYPE = "fn"


def operand_node(function: str, operand: Operand) -> Optional[Node]:
    if operand.kind == OperandKind.REGISTER:
        return RegisterVar(function, operand.name)
    if operand.kind == OperandKind.GLOBAL:
        return SymbolVar(operand.name)
    return None


class PointsToSolver:
    """
    Inclusion-based, structure-sensitive points-to solver.

    Stage 1 applies every rule and accretes object type sets through casts.
    Stage 2 reuses the stage-1 type sets, treats casts as copies and only
    creates a field sub-object when some type of the object owns the offset.
    """

    def __init__(
        self,
        module: Module,
        stage: int = 1,
        seed_types: Optional[dict[Target, frozenset[str]]] = None,
        objects: Optional[ObjectTable] = None,
    ):
        self.module = module
        self.stage = stage
        self.types = module.types
        self.objects = objects or ObjectTable(module)
        self.functions = module.function_map()
        self.externals = module.external_map()

        self.pt: dict[Node, set[Target]] = defaultdict(set)
        self.succ: dict[Node, set[Node]] = defaultdict(set)
        self.type_sets: dict[Target, set[str]] = defaultdict(set)
        self.fields: dict[AbstractObject, dict[Offset, FieldObject]] = defaultdict(dict)

        self.load_binds: dict[Node, list[Node]] = defaultdict(list)
        self.store_binds: dict[Node, list[Node]] = defaultdict(list)
        self.field_binds: dict[Node, list[tuple[Node, Offset]]] = defaultdict(list)
        self.cast_binds: dict[Node, list[str]] = defaultdict(list)
        self.call_binds: dict[Node, list[tuple[CallSite, Instruction, str]]] = defaultdict(list)
        self.star_loads: dict[AbstractObject, set[Node]] = defaultdict(set)
        self.star_stores: dict[AbstractObject, set[Node]] = defaultdict(set)
        self.returns: dict[str, list[Node]] = defaultdict(list)

        self.call_graph: set[tuple[CallSite, str]] = set()
        self.rejected_calls: set[tuple[CallSite, str]] = set()
        self.diagnostics: list[Diagnostic] = []
        self.worklist: deque[tuple[Node, frozenset[Target]]] = deque()
        self.iterations = 0

        if seed_types:
            for target, type_names in seed_types.items():
                self.type_sets[target] |= type_names

    def push(self, node: Node, targets: Iterable[Target]) -> None:
        targets = frozenset(targets)
        if targets:
            self.worklist.append((node, targets))

    def add_edge(self, source: Node, target: Node) -> None:
        if target in self.succ[source]:
            return
        self.succ[source].add(target)
        if self.pt[source]:
            self.push(target, self.pt[source])

    def cells(self, base: AbstractObject) -> list[Target]:
        return [base, *self.fields[base].values()]

    def get_field(self, base: AbstractObject, offset: Offset) -> FieldObject:
        existing = self.fields[base].get(offset)
        if existing is not None:
            return existing
        sub = FieldObject(base, offset)
        self.fields[base][offset] = sub
        if offset == 0:
            # offset 0 and the object head are the same cell
            self.add_edge(base, sub)
            self.add_edge(sub, base)
        for dst in self.star_loads[base]:
            self.add_edge(sub, dst)
        for src in self.star_stores[base]:
            self.add_edge(src, sub)
        return sub

    def field_allowed(self, target: Target, relative: int, absolute: int) -> bool:
        base_types = self.type_sets.get(target.base, ())
        own_types = self.type_sets.get(target, ()) if isinstance(target, FieldObject) else ()
        if not base_types and not own_types:
            return True
        if any(absolute in self.types.type_offsets(t) for t in base_types):
            return True
        return any(relative in self.types.type_offsets(t) for t in own_types)

    def apply_field(self, target: Target, offset: Offset, dst: Node) -> None:
        if isinstance(target, FieldObject):
            if target.offset == STAR or offset == STAR:
                absolute: Offset = STAR
            else:
                absolute = target.offset + offset
        else:
            absolute = offset
        if self.stage == 2 and absolute != STAR and not self.field_allowed(target, offset, absolute):
            return
        self.push(dst, {self.get_field(target.base, absolute)})

    def load_from(self, target: Target, dst: Node) -> None:
        if isinstance(target, FieldObject) and target.is_star:
            self.star_loads[target.base].add(dst)
            for cell in self.cells(target.base):
                self.add_edge(cell, dst)
        else:
            self.add_edge(target, dst)

    def store_into(self, target: Target, src: Node) -> None:
        if isinstance(target, FieldObject) and target.is_star:
            self.star_stores[target.base].add(src)
            for cell in self.cells(target.base):
                self.add_edge(src, cell)
        else:
            self.add_edge(src, target)

    def resolve_call(self, site: CallSite, inst: Instruction, caller: str, target: Target) -> None:
        if not isinstance(target, AbstractObject) or target.site_kind != SiteKind.FUNCTION:
            return
        callee = target.symbol
        edge = (site, callee)
        if edge in self.call_graph or edge in self.rejected_calls:
            return
        func = self.functions[callee]
        if len(func.params) != len(inst.arguments):
            self.rejected_calls.add(edge)
            self.diagnostics.append(
                Diagnostic(site, f"arity mismatch calling @{callee}: {len(inst.arguments)} != {len(func.params)}")
            )
            logger.warning("Skipping call edge %s:%s -> @%s (arity mismatch)", site[0], site[1], callee)
            return
        self.call_graph.add(edge)
        for argument, param in zip(inst.arguments, func.params):
            node = operand_node(caller, argument)
            if node is not None:
                self.add_edge(node, RegisterVar(callee, param))
        if inst.result is not None:
            for ret in self.returns[callee]:
                self.add_edge(ret, RegisterVar(caller, inst.result))

    def _install(self, func: Function) -> None:
        name = func.name
        for index, inst in enumerate(func.body):
            dst = RegisterVar(name, inst.result) if inst.result is not None else None
            ops = [operand_node(name, op) for op in inst.operands]
            kind = inst.kind
            if kind == Opcode.STACK_GLOBAL_ALLOC:
                obj = self.objects.site(name, index)
                if self.stage == 1:
                    self.type_sets[obj].add(inst.type_operand)
                self.push(dst, {obj})
            elif kind == Opcode.HEAP_ALLOC:
                self.push(dst, {self.objects.site(name, index)})
            elif kind in (Opcode.COPY, Opcode.PHI):
                for src in ops:
                    if src is not None:
                        self.add_edge(src, dst)
            elif kind == Opcode.CAST:
                self.add_edge(ops[0], dst)
                if self.stage == 1:
                    self.cast_binds[ops[0]].append(inst.type_operand)
            elif kind == Opcode.LOAD:
                self.load_binds[ops[0]].append(dst)
            elif kind == Opcode.STORE:
                if ops[0] is not None:
                    self.store_binds[ops[1]].append(ops[0])
            elif kind == Opcode.FIELD:
                path = inst.field_operand
                offset: Offset = STAR if path.unknown else self.types.offset_of(path.type_name, path.steps)
                self.field_binds[ops[0]].append((dst, offset))
            elif kind == Opcode.CALL:
                if inst.is_free:
                    continue
                site = (name, index)
                callee = inst.callee
                if callee.is_symbol and callee.name in self.externals:
                    self.call_graph.add((site, callee.name))
                    if dst is not None:
                        for src in ops[1:]:
                            if src is not None:
                                self.add_edge(src, dst)
                        self.push(dst, {self.objects.site(name, index)})
                    continue
                self.call_binds[ops[0]].append((site, inst, name))

    def _process(self, node: Node, delta: frozenset[Target]) -> None:
        current = self.pt[node]
        new = delta - current
        if not new:
            return
        current |= new
        for succ in list(self.succ[node]):
            self.push(succ, new)
        for dst in self.load_binds.get(node, ()):
            for target in new:
                self.load_from(target, dst)
        for src in self.store_binds.get(node, ()):
            for target in new:
                self.store_into(target, src)
        for dst, offset in self.field_binds.get(node, ()):
            for target in new:
                self.apply_field(target, offset, dst)
        for type_name in self.cast_binds.get(node, ()):
            for target in new:
                self.type_sets[target].add(type_name)
        for site, inst, caller in self.call_binds.get(node, ()):
            for target in new:
                self.resolve_call(site, inst, caller, target)

    def solve(self) -> PointsToState:
        globals_by_name = self.module.global_map()
        for glob, obj in self.objects.globals.items():
            if self.stage == 1:
                self.type_sets[obj].add(globals_by_name[glob].type_name)
            self.push(SymbolVar(glob), {obj})
        for func_name, obj in self.objects.functions.items():
            if self.stage == 1:
                self.type_sets[obj].add(FUNCTION_TYPE)
            self.push(SymbolVar(func_name), {obj})
        for func in self.module.functions:
            self._collect_returns(func)
        for func in self.module.functions:
            self._install(func)

        while self.worklist:
            node, delta = self.worklist.popleft()
            self.iterations += 1
            self._process(node, delta)

        resolved_sites = {site for site, _ in self.call_graph}
        for binds in self.call_binds.values():
            for site, inst, _ in binds:
                if site not in resolved_sites:
                    self.diagnostics.append(Diagnostic(site, f"no callee resolved for call through {inst.callee}"))
                    logger.warning("Unresolved call at %s:%s through %s", site[0], site[1], inst.callee)

        logger.info(
            "Stage %d solved in %d worklist steps (%d pointer facts, %d call edges)",
            self.stage,
            self.iterations,
            sum(len(targets) for targets in self.pt.values()),
            len(self.call_graph),
        )
        return PointsToState(
            stage=self.stage,
            objects=self.objects,
            types=self.types,
            pt={node: frozenset(targets) for node, targets in self.pt.items() if targets},
            type_sets={target: frozenset(names) for target, names in self.type_sets.items() if names},
            field_objects={base: dict(subs) for base, subs in self.fields.items() if subs},
            call_graph=frozenset(self.call_graph),
            diagnostics=tuple(self.diagnostics),
        )

    def _collect_returns(self, func: Function) -> None:
        for inst in func.body:
            if inst.kind == Opcode.RET and inst.operands:
                node = operand_node(func.name, inst.operands[0])
                if node is not None:
                    self.returns[func.name].append(node)


def solve_stage1(module: Module) -> PointsToState:
    return PointsToSolver(module, stage=1).solve()


def solve_stage2(module: Module, stage1: PointsToState) -> PointsToState:
    return PointsToSolver(module, stage=2, seed_types=stage1.type_sets, objects=stage1.objects).solve()


def resolve_calls(state: PointsToState, module: Module) -> set[tuple[CallSite, str]]:
    """
    Call-graph edges implied by ``state``: every arity-compatible function
    object reaching a call target, plus direct calls to external functions.
    """
    functions = module.function_map()
    externals = module.external_map()
    edges: set[tuple[CallSite, str]] = set()
    for func, index, inst in module.instructions():
        if inst.kind != Opcode.CALL or inst.is_free:
            continue
        site = (func.name, index)
        if inst.callee.is_symbol and inst.callee.name in externals:
            edges.add((site, inst.callee.name))
            continue
        for target in state.points_to(operand_node(func.name, inst.callee)):
            if isinstance(target, AbstractObject) and target.site_kind == SiteKind.FUNCTION:
                if len(functions[target.symbol].params) == len(inst.arguments):
                    edges.add((site, target.symbol))
    return edges
