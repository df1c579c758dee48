from .module import (
    FREE_INTRINSIC,
    ExternalDef,
    FieldPath,
    Function,
    GlobalDef,
    Instruction,
    Module,
    Opcode,
    Operand,
    OperandKind,
)
from .parser import parse_module
from .printer import module_hash, print_module
from .types import TypeDef, TypeKind, TypeTable, offset_of, pointer_offsets, type_offsets
from .validate import validate_module
