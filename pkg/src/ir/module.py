from enum import Enum
from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from src.ir.types import PathStep, TypeTable

FREE_INTRINSIC = "free"
DEFAULT_ENTRY = "main"


class Opcode(str, Enum):
    STACK_GLOBAL_ALLOC = "alloca"
    HEAP_ALLOC = "malloc"
    COPY = "copy"
    CAST = "cast"
    LOAD = "load"
    STORE = "store"
    PHI = "phi"
    FIELD = "field"
    CALL = "call"
    RET = "ret"


class OperandKind(str, Enum):
    REGISTER = "register"
    GLOBAL = "global"
    CONSTANT = "constant"
    NULL = "null"


class Operand(BaseModel):
    kind: OperandKind
    name: Optional[str] = None
    value: Optional[int] = None

    model_config = ConfigDict(frozen=True)

    @classmethod
    def register(cls, name: str) -> "Operand":
        return cls(kind=OperandKind.REGISTER, name=name)

    @classmethod
    def symbol(cls, name: str) -> "Operand":
        return cls(kind=OperandKind.GLOBAL, name=name)

    @classmethod
    def constant(cls, value: int) -> "Operand":
        return cls(kind=OperandKind.CONSTANT, value=value)

    @classmethod
    def null(cls) -> "Operand":
        return cls(kind=OperandKind.NULL)

    @property
    def is_register(self) -> bool:
        return self.kind == OperandKind.REGISTER

    @property
    def is_symbol(self) -> bool:
        return self.kind == OperandKind.GLOBAL

    def __str__(self) -> str:
        if self.kind == OperandKind.REGISTER:
            return f"%{self.name}"
        if self.kind == OperandKind.GLOBAL:
            return f"@{self.name}"
        if self.kind == OperandKind.CONSTANT:
            return str(self.value)
        return "null"


class FieldPath(BaseModel):
    """
    ``type_name.path`` of a FIELD instruction. ``unknown`` marks a
    variable-offset access whose byte offset is only known at run time.
    """

    type_name: Optional[str] = None
    steps: Tuple[PathStep, ...] = ()
    unknown: bool = False

    model_config = ConfigDict(frozen=True)

    def __str__(self) -> str:
        if self.unknown:
            return "*"
        text = self.type_name or ""
        for step in self.steps:
            text += f"[{step}]" if isinstance(step, int) else f".{step}"
        return text


class Instruction(BaseModel):
    kind: Opcode
    result: Optional[str] = None
    operands: Tuple[Operand, ...] = ()
    type_operand: Optional[str] = None
    field_operand: Optional[FieldPath] = None
    size_operand: Optional[int] = Field(None, ge=0)

    model_config = ConfigDict(frozen=True)

    @property
    def callee(self) -> Operand:
        return self.operands[0]

    @property
    def arguments(self) -> Tuple[Operand, ...]:
        return self.operands[1:]

    @property
    def is_free(self) -> bool:
        return (
            self.kind == Opcode.CALL
            and self.callee.is_symbol
            and self.callee.name == FREE_INTRINSIC
        )


class GlobalDef(BaseModel):
    name: str
    type_name: str

    model_config = ConfigDict(frozen=True)


class ExternalDef(BaseModel):
    name: str
    arity: int = Field(..., ge=0)

    model_config = ConfigDict(frozen=True)


class Function(BaseModel):
    name: str
    params: Tuple[str, ...] = ()
    body: Tuple[Instruction, ...] = ()

    model_config = ConfigDict(frozen=True)

    def stack_sites(self) -> list[Tuple[int, Instruction]]:
        return [(index, inst) for index, inst in enumerate(self.body) if inst.kind == Opcode.STACK_GLOBAL_ALLOC]


class Module(BaseModel):
    types: TypeTable = Field(default_factory=TypeTable)
    globals: Tuple[GlobalDef, ...] = ()
    externals: Tuple[ExternalDef, ...] = ()
    functions: Tuple[Function, ...] = ()
    entry: str = DEFAULT_ENTRY

    model_config = ConfigDict(frozen=True)

    def function(self, name: str) -> Function:
        for func in self.functions:
            if func.name == name:
                return func
        raise KeyError(name)

    def function_map(self) -> dict[str, Function]:
        return {func.name: func for func in self.functions}

    def global_map(self) -> dict[str, GlobalDef]:
        return {glob.name: glob for glob in self.globals}

    def external_map(self) -> dict[str, ExternalDef]:
        return {ext.name: ext for ext in self.externals}

    def instructions(self):
        for func in self.functions:
            for index, inst in enumerate(func.body):
                yield func, index, inst

    def allocation_sites(self) -> int:
        return sum(1 for _, _, inst in self.instructions() if inst.kind == Opcode.HEAP_ALLOC)

    def alloca_size(self, inst: Instruction) -> int:
        if inst.size_operand is not None:
            return max(inst.size_operand, 1)
        return max(self.types.get(inst.type_operand).byte_size, 1)

    def global_size(self, glob: GlobalDef) -> int:
        return max(self.types.get(glob.type_name).byte_size, 1)
