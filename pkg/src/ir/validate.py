from src.exceptions import IRValidationError
from src.ir.module import FREE_INTRINSIC, Function, Instruction, Module, Opcode, OperandKind

# (minimum, maximum) operand counts per instruction kind; None means unbounded.
OPERAND_ARITY = {
    Opcode.STACK_GLOBAL_ALLOC: (0, 0),
    Opcode.HEAP_ALLOC: (0, 0),
    Opcode.COPY: (1, 1),
    Opcode.CAST: (1, 1),
    Opcode.LOAD: (1, 1),
    Opcode.STORE: (2, 2),
    Opcode.PHI: (2, 2),
    Opcode.FIELD: (1, 2),
    Opcode.CALL: (1, None),
    Opcode.RET: (0, 1),
}

HAS_RESULT = {
    Opcode.STACK_GLOBAL_ALLOC: True,
    Opcode.HEAP_ALLOC: True,
    Opcode.COPY: True,
    Opcode.CAST: True,
    Opcode.LOAD: True,
    Opcode.STORE: False,
    Opcode.PHI: True,
    Opcode.FIELD: True,
    Opcode.RET: False,
}


def check_arity(inst: Instruction, where: str) -> None:
    low, high = OPERAND_ARITY[inst.kind]
    count = len(inst.operands)
    if count < low or (high is not None and count > high):
        raise IRValidationError(f"{where}: '{inst.kind.value}' has {count} operands")
    expects_result = HAS_RESULT.get(inst.kind)
    if expects_result is not None and expects_result != (inst.result is not None):
        raise IRValidationError(f"{where}: '{inst.kind.value}' result does not match its kind")
    if inst.kind == Opcode.HEAP_ALLOC and inst.size_operand is None:
        raise IRValidationError(f"{where}: malloc needs a byte count")
    if inst.kind in (Opcode.STACK_GLOBAL_ALLOC, Opcode.CAST) and inst.type_operand is None:
        raise IRValidationError(f"{where}: '{inst.kind.value}' needs a type operand")
    if inst.kind == Opcode.FIELD:
        path = inst.field_operand
        if path is None:
            raise IRValidationError(f"{where}: field needs a field path or '*'")
        if len(inst.operands) != (2 if path.unknown else 1):
            raise IRValidationError(f"{where}: field operand count does not match its path")
    for position, operand in enumerate(inst.operands):
        must_be_register = (
            inst.kind in (Opcode.CAST, Opcode.LOAD, Opcode.PHI)
            or (inst.kind == Opcode.FIELD and position == 0)
            or (inst.kind == Opcode.STORE and position == 1)
        )
        if must_be_register and not operand.is_register:
            raise IRValidationError(f"{where}: operand {position} of '{inst.kind.value}' must be a register")
    if inst.is_free and (len(inst.arguments) != 1 or inst.result is not None):
        raise IRValidationError(f"{where}: free takes one pointer and returns nothing")


def _validate_function(module: Module, func: Function, symbols: set[str]) -> None:
    call_only = {FREE_INTRINSIC} | {ext.name for ext in module.externals}
    globals_ = {glob.name for glob in module.globals}
    defined: set[str] = set()
    for param in func.params:
        if param in defined:
            raise IRValidationError(f"@{func.name}: parameter %{param} repeated")
        defined.add(param)
    for index, inst in enumerate(func.body):
        if inst.result is not None:
            if inst.result in defined:
                raise IRValidationError(f"@{func.name}[{index}]: register %{inst.result} assigned twice")
            defined.add(inst.result)

    for index, inst in enumerate(func.body):
        where = f"@{func.name}[{index}]"
        check_arity(inst, where)
        if inst.kind == Opcode.CALL and inst.callee.is_symbol and inst.callee.name in globals_:
            raise IRValidationError(f"{where}: @{inst.callee.name} is a global, not a function")
        if inst.kind == Opcode.CALL and inst.callee.kind in (OperandKind.CONSTANT, OperandKind.NULL):
            raise IRValidationError(f"{where}: call target must be a register or a function")
        external = module.external_map().get(inst.callee.name) if inst.kind == Opcode.CALL else None
        if external is not None and inst.callee.is_symbol and external.arity != len(inst.arguments):
            raise IRValidationError(f"{where}: @{external.name} takes {external.arity} arguments")
        for operand in inst.operands:
            if operand.kind == OperandKind.REGISTER and operand.name not in defined:
                raise IRValidationError(f"{where}: undefined register %{operand.name}")
            if operand.kind == OperandKind.GLOBAL:
                if operand.name not in symbols:
                    raise IRValidationError(f"{where}: undefined symbol @{operand.name}")
                is_callee = inst.kind == Opcode.CALL and operand is inst.callee
                if operand.name in call_only and not is_callee:
                    raise IRValidationError(f"{where}: @{operand.name} may only be called directly")
        if inst.type_operand is not None:
            module.types.get(inst.type_operand)
        if inst.field_operand is not None and not inst.field_operand.unknown:
            module.types.offset_of(inst.field_operand.type_name, inst.field_operand.steps)


def validate_module(module: Module) -> None:
    """
    Structural checks: unique names, defined variables, known types, operand
    arity, and a single entry function.
    """
    symbols: set[str] = {FREE_INTRINSIC}
    for name in (
        [glob.name for glob in module.globals]
        + [ext.name for ext in module.externals]
        + [func.name for func in module.functions]
    ):
        if name in symbols:
            raise IRValidationError(f"Symbol @{name} is defined more than once")
        symbols.add(name)

    for glob in module.globals:
        module.types.get(glob.type_name)

    if module.functions and module.entry not in {func.name for func in module.functions}:
        raise IRValidationError(f"Entry function @{module.entry} is not defined")

    for func in module.functions:
        _validate_function(module, func, symbols)
