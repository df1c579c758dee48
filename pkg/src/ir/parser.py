import logging
import re
from typing import Optional, Tuple

from src.exceptions import IRSyntaxError, IRValidationError
from src.ir.module import (
    DEFAULT_ENTRY,
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
from src.ir.types import PathStep, TypeTable
from src.ir.validate import validate_module

logger = logging.getLogger(__name__)

NAME = r"[A-Za-z_][\w.]*"
REG_NAME = r"[\w.]+"
IDENT = r"[A-Za-z_]\w*"

TYPE_STRUCT_RE = re.compile(rf"^type\s+({IDENT})\s*=\s*struct\s*\{{(.*)\}}$")
TYPE_ARRAY_RE = re.compile(rf"^type\s+({IDENT})\s*=\s*array\s*\[\s*(\d+)\s*x\s*({IDENT})\s*\]$")
TYPE_SCALAR_RE = re.compile(rf"^type\s+({IDENT})\s*=\s*scalar\s+(\d+)$")
GLOBAL_RE = re.compile(rf"^global\s+@({NAME})\s*:\s*({IDENT})$")
DECLARE_RE = re.compile(rf"^declare\s+@({NAME})\s*\(\s*(\d+)\s*\)$")
DEFINE_RE = re.compile(rf"^define\s+@({NAME})\s*\((.*)\)\s*\{{$")
ENTRY_RE = re.compile(rf"^entry\s+@({NAME})$")
RESULT_RE = re.compile(rf"^%({REG_NAME})\s*=\s*(.+)$")
CALL_RE = re.compile(r"^call\s+(\S+?)\s*\((.*)\)$")
CAST_RE = re.compile(rf"^cast\s+(\S+)\s+to\s+({IDENT})$")
FIELD_PATH_RE = re.compile(rf"^({IDENT}?)((?:\.{IDENT}|\[\d+\])*)$")
PATH_STEP_RE = re.compile(rf"\.({IDENT})|\[(\d+)\]")
INT_RE = re.compile(r"^-?(0x[0-9a-fA-F]+|\d+)$")


class _Cursor:
    def __init__(self, line_no: int, raw: str):
        self.line_no = line_no
        self.raw = raw

    def error(self, message: str, token: Optional[str] = None) -> IRSyntaxError:
        column = self.raw.find(token) + 1 if token else 1
        return IRSyntaxError(message, self.line_no, max(column, 1))


def _split_args(text: str) -> list[str]:
    text = text.strip()
    if not text:
        return []
    return [part.strip() for part in text.split(",")]


def parse_operand(token: str, cursor: _Cursor) -> Operand:
    if token.startswith("%") and re.fullmatch(REG_NAME, token[1:]):
        return Operand.register(token[1:])
    if token.startswith("@") and re.fullmatch(NAME, token[1:]):
        return Operand.symbol(token[1:])
    if token == "null":
        return Operand.null()
    if INT_RE.match(token):
        return Operand.constant(int(token, 0))
    raise cursor.error(f"Invalid operand '{token}'", token)


def _parse_register(token: str, cursor: _Cursor) -> Operand:
    operand = parse_operand(token, cursor)
    if not operand.is_register:
        raise cursor.error(f"Expected a register, found '{token}'", token)
    return operand


def _parse_int(token: str, cursor: _Cursor) -> int:
    if not INT_RE.match(token):
        raise cursor.error(f"Expected an integer, found '{token}'", token)
    return int(token, 0)


def parse_field_path(text: str, cursor: _Cursor) -> FieldPath:
    if text == "*":
        return FieldPath(unknown=True)
    match = FIELD_PATH_RE.match(text)
    if not match or not match.group(1):
        raise cursor.error(f"Invalid field path '{text}'", text)
    steps: list[PathStep] = []
    for name, index in PATH_STEP_RE.findall(match.group(2)):
        steps.append(int(index) if index else name)
    if not steps:
        raise cursor.error(f"Field path '{text}' names no field", text)
    return FieldPath(type_name=match.group(1), steps=tuple(steps))


def parse_instruction(text: str, cursor: _Cursor) -> Instruction:
    result: Optional[str] = None
    match = RESULT_RE.match(text)
    if match:
        result, text = match.group(1), match.group(2).strip()
    opcode_token = text.split(None, 1)[0]
    rest = text[len(opcode_token):].strip()

    def need_result() -> None:
        if result is None:
            raise cursor.error(f"'{opcode_token}' must assign a register", opcode_token)

    def no_result() -> None:
        if result is not None:
            raise cursor.error(f"'{opcode_token}' does not produce a value", opcode_token)

    if opcode_token == "alloca":
        need_result()
        parts = _split_args(rest)
        if len(parts) not in (1, 2):
            raise cursor.error("alloca takes a type and an optional byte count", opcode_token)
        size = _parse_int(parts[1], cursor) if len(parts) == 2 else None
        return Instruction(kind=Opcode.STACK_GLOBAL_ALLOC, result=result, type_operand=parts[0], size_operand=size)
    if opcode_token == "malloc":
        need_result()
        parts = _split_args(rest)
        if len(parts) != 1:
            raise cursor.error("malloc takes exactly one byte count", opcode_token)
        return Instruction(kind=Opcode.HEAP_ALLOC, result=result, size_operand=_parse_int(parts[0], cursor))
    if opcode_token in ("copy", "load"):
        need_result()
        parts = _split_args(rest)
        if len(parts) != 1:
            raise cursor.error(f"{opcode_token} takes exactly one operand", opcode_token)
        operand = parse_operand(parts[0], cursor) if opcode_token == "copy" else _parse_register(parts[0], cursor)
        return Instruction(kind=Opcode(opcode_token), result=result, operands=(operand,))
    if opcode_token == "cast":
        need_result()
        cast = CAST_RE.match(text)
        if not cast:
            raise cursor.error("cast expects 'cast %q to TYPE'", opcode_token)
        return Instruction(
            kind=Opcode.CAST,
            result=result,
            operands=(_parse_register(cast.group(1), cursor),),
            type_operand=cast.group(2),
        )
    if opcode_token == "store":
        no_result()
        parts = _split_args(rest)
        if len(parts) != 2:
            raise cursor.error("store takes exactly two operands", opcode_token)
        return Instruction(
            kind=Opcode.STORE,
            operands=(parse_operand(parts[0], cursor), _parse_register(parts[1], cursor)),
        )
    if opcode_token == "phi":
        need_result()
        parts = _split_args(rest)
        if len(parts) != 2:
            raise cursor.error("phi takes exactly two inputs", opcode_token)
        return Instruction(
            kind=Opcode.PHI,
            result=result,
            operands=tuple(_parse_register(part, cursor) for part in parts),
        )
    if opcode_token == "field":
        need_result()
        parts = _split_args(rest)
        if len(parts) < 2:
            raise cursor.error("field takes a base register and a field path", opcode_token)
        base = _parse_register(parts[0], cursor)
        path = parse_field_path(parts[1], cursor)
        if path.unknown:
            if len(parts) != 3:
                raise cursor.error("field with '*' takes a run-time byte offset operand", opcode_token)
            return Instruction(
                kind=Opcode.FIELD,
                result=result,
                operands=(base, parse_operand(parts[2], cursor)),
                field_operand=path,
            )
        if len(parts) != 2:
            raise cursor.error("field with a concrete path takes two operands", opcode_token)
        return Instruction(kind=Opcode.FIELD, result=result, operands=(base,), field_operand=path)
    if opcode_token == "call":
        call = CALL_RE.match(text)
        if not call:
            raise cursor.error("call expects 'call CALLEE(ARGS)'", opcode_token)
        callee = parse_operand(call.group(1), cursor)
        if callee.kind not in (OperandKind.REGISTER, OperandKind.GLOBAL):
            raise cursor.error("call target must be a function name or a register", call.group(1))
        args = tuple(parse_operand(arg, cursor) for arg in _split_args(call.group(2)))
        return Instruction(kind=Opcode.CALL, result=result, operands=(callee,) + args)
    if opcode_token == "ret":
        no_result()
        parts = _split_args(rest)
        if len(parts) > 1:
            raise cursor.error("ret takes at most one operand", opcode_token)
        return Instruction(kind=Opcode.RET, operands=tuple(parse_operand(p, cursor) for p in parts))
    raise cursor.error(f"Unknown instruction '{opcode_token}'", opcode_token)


def _parse_struct_members(body: str, cursor: _Cursor) -> list[Tuple[str, str]]:
    members = []
    for part in _split_args(body):
        if ":" not in part:
            raise cursor.error(f"Struct member '{part}' must be 'name: type'", part)
        name, type_name = (piece.strip() for piece in part.split(":", 1))
        if not re.fullmatch(IDENT, name) or not re.fullmatch(IDENT, type_name):
            raise cursor.error(f"Invalid struct member '{part}'", part)
        members.append((name, type_name))
    return members


def parse_module(text: str) -> Module:
    """
    Parse and validate ``.lir`` source text.

    Raises ``IRSyntaxError`` for malformed lines and ``IRValidationError``
    for undefined variables, arity and naming problems.
    """
    types = TypeTable()
    globals_: list[GlobalDef] = []
    externals: list[ExternalDef] = []
    functions: list[Function] = []
    entry: Optional[str] = None

    current: Optional[Tuple[str, Tuple[str, ...], list[Instruction], _Cursor]] = None

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        cursor = _Cursor(line_no, raw)

        if current is not None:
            if line == "}":
                name, params, body, _ = current
                functions.append(Function(name=name, params=params, body=tuple(body)))
                current = None
                continue
            current[2].append(parse_instruction(line, cursor))
            continue

        try:
            if match := TYPE_STRUCT_RE.match(line):
                types.define_struct(match.group(1), _parse_struct_members(match.group(2), cursor))
            elif match := TYPE_ARRAY_RE.match(line):
                types.define_array(match.group(1), match.group(3), int(match.group(2)))
            elif match := TYPE_SCALAR_RE.match(line):
                types.define_scalar(match.group(1), int(match.group(2)))
            elif match := GLOBAL_RE.match(line):
                globals_.append(GlobalDef(name=match.group(1), type_name=match.group(2)))
            elif match := DECLARE_RE.match(line):
                externals.append(ExternalDef(name=match.group(1), arity=int(match.group(2))))
            elif match := DEFINE_RE.match(line):
                params = []
                for token in _split_args(match.group(2)):
                    params.append(_parse_register(token, cursor).name)
                current = (match.group(1), tuple(params), [], cursor)
            elif match := ENTRY_RE.match(line):
                if entry is not None:
                    raise cursor.error("Entry function declared twice", "entry")
                entry = match.group(1)
            else:
                raise cursor.error(f"Unrecognised declaration '{line}'", line.split()[0])
        except IRValidationError as exc:
            raise IRValidationError(f"line {line_no}: {exc.message}") from exc

    if current is not None:
        raise current[3].error(f"Function '@{current[0]}' is not closed")

    module = Module(
        types=types,
        globals=tuple(globals_),
        externals=tuple(externals),
        functions=tuple(functions),
        entry=entry or DEFAULT_ENTRY,
    )
    validate_module(module)
    logger.info(
        "Parsed module: %d functions, %d globals, %d heap sites",
        len(module.functions),
        len(module.globals),
        module.allocation_sites(),
    )
    return module
