import hashlib

from src.ir.module import Function, Instruction, Module, Opcode
from src.ir.types import TypeDef, TypeKind


def format_type(type_def: TypeDef) -> str:
    if type_def.kind == TypeKind.STRUCT:
        members = ", ".join(f"{slot.name}: {slot.type_name}" for slot in type_def.fields)
        return f"type {type_def.name} = struct {{ {members} }}" if members else f"type {type_def.name} = struct {{ }}"
    if type_def.kind == TypeKind.ARRAY:
        return f"type {type_def.name} = array [{type_def.length} x {type_def.element}]"
    return f"type {type_def.name} = scalar {type_def.byte_size}"


def format_instruction(inst: Instruction) -> str:
    ops = inst.operands
    if inst.kind == Opcode.STACK_GLOBAL_ALLOC:
        text = f"alloca {inst.type_operand}"
        if inst.size_operand is not None:
            text += f", {inst.size_operand}"
    elif inst.kind == Opcode.HEAP_ALLOC:
        text = f"malloc {inst.size_operand}"
    elif inst.kind in (Opcode.COPY, Opcode.LOAD):
        text = f"{inst.kind.value} {ops[0]}"
    elif inst.kind == Opcode.CAST:
        text = f"cast {ops[0]} to {inst.type_operand}"
    elif inst.kind == Opcode.STORE:
        text = f"store {ops[0]}, {ops[1]}"
    elif inst.kind == Opcode.PHI:
        text = f"phi {ops[0]}, {ops[1]}"
    elif inst.kind == Opcode.FIELD:
        text = f"field {ops[0]}, {inst.field_operand}"
        if inst.field_operand is not None and inst.field_operand.unknown:
            text += f", {ops[1]}"
    elif inst.kind == Opcode.CALL:
        args = ", ".join(str(arg) for arg in inst.arguments)
        text = f"call {inst.callee}({args})"
    else:
        text = f"ret {ops[0]}" if ops else "ret"
    if inst.result is not None:
        return f"%{inst.result} = {text}"
    return text


def format_function(func: Function) -> list[str]:
    params = ", ".join(f"%{param}" for param in func.params)
    lines = [f"define @{func.name}({params}) {{"]
    lines.extend(f"  {format_instruction(inst)}" for inst in func.body)
    lines.append("}")
    return lines


def print_module(module: Module) -> str:
    """
    Canonical text of ``module``; parsing it yields an equal module.
    """
    lines: list[str] = [format_type(t) for t in module.types.user_types()]
    lines.extend(f"global @{glob.name} : {glob.type_name}" for glob in module.globals)
    lines.extend(f"declare @{ext.name}({ext.arity})" for ext in module.externals)
    for func in module.functions:
        if lines:
            lines.append("")
        lines.extend(format_function(func))
    lines.append(f"entry @{module.entry}")
    return "\n".join(lines) + "\n"


def module_hash(module: Module) -> bytes:
    return hashlib.blake2b(print_module(module).encode("utf-8"), digest_size=16).digest()
