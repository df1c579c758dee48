import struct
from enum import IntEnum
from pathlib import Path

import msgpack

from src.exceptions import MetadataFormatError
from src.metadata.records import (
    FunctionLayout,
    GlobalLayout,
    GlobalRecord,
    HeapFieldRecord,
    ObjectLayout,
    ObjectPointerTable,
    SlotLayout,
    StackRecord,
)

MAGIC = b"PTMD"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sHH16sI")
SECTION_HEADER = struct.Struct("<BI")
HEADER_SIZE = HEADER.size


class Section(IntEnum):
    OBJECTS = 1
    OBJECT_LAYOUTS = 2
    GLOBALS = 3
    FUNCTIONS = 4


def _encode_record(record) -> list:
    if isinstance(record, HeapFieldRecord):
        return [0, record.container_static_id, record.offset]
    if isinstance(record, GlobalRecord):
        return [1, record.index]
    return [2, record.function_id, record.slot_id]


def _decode_record(raw: list):
    tag = raw[0]
    if tag == 0:
        return HeapFieldRecord(container_static_id=raw[1], offset=raw[2])
    if tag == 1:
        return GlobalRecord(index=raw[1])
    if tag == 2:
        return StackRecord(function_id=raw[1], slot_id=raw[2])
    raise MetadataFormatError(f"Unknown record tag {tag}")


def _sections(table: ObjectPointerTable) -> list[tuple[Section, list]]:
    bodies = [
        (Section.OBJECTS, [[sid, [_encode_record(r) for r in table.objects[sid]]] for sid in sorted(table.objects)]),
        (
            Section.OBJECT_LAYOUTS,
            [
                [layout.static_id, layout.typed, list(layout.pointer_offsets)]
                for _, layout in sorted(table.object_layouts.items())
            ],
        ),
        (
            Section.GLOBALS,
            [[g.index, g.name, g.size, list(g.pointer_offsets)] for g in sorted(table.globals, key=lambda g: g.index)],
        ),
        (
            Section.FUNCTIONS,
            [
                [f.function_id, f.name, [[s.slot_id, s.size, list(s.pointer_offsets)] for s in f.slots]]
                for f in sorted(table.functions, key=lambda f: f.function_id)
            ],
        ),
    ]
    return [(tag, body) for tag, body in bodies if body]


def serialize_tables(table: ObjectPointerTable) -> bytes:
    """
    Encode ``table`` as a ``.ptm`` stream.

    Layout (little endian): magic ``PTMD``, u16 version, u16 flags, 16-byte
    build hash, u32 section count; then per non-empty section a u8 tag, a u32
    body length and a msgpack body.
    """
    sections = _sections(table)
    chunks = [HEADER.pack(MAGIC, FORMAT_VERSION, 0, table.build_hash, len(sections))]
    for tag, body in sections:
        payload = msgpack.packb(body, use_bin_type=True)
        chunks.append(SECTION_HEADER.pack(tag, len(payload)))
        chunks.append(payload)
    return b"".join(chunks)


def deserialize_tables(data: bytes) -> ObjectPointerTable:
    if len(data) < HEADER_SIZE:
        raise MetadataFormatError(f"Metadata truncated: {len(data)} bytes, header needs {HEADER_SIZE}")
    magic, version, _flags, build_hash, count = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise MetadataFormatError(f"Bad metadata magic {magic!r}")
    if version != FORMAT_VERSION:
        raise MetadataFormatError(f"Metadata version {version} is not supported (expected {FORMAT_VERSION})")

    bodies: dict[Section, list] = {}
    position = HEADER_SIZE
    for _ in range(count):
        if position + SECTION_HEADER.size > len(data):
            raise MetadataFormatError("Metadata truncated inside a section header")
        tag, length = SECTION_HEADER.unpack_from(data, position)
        position += SECTION_HEADER.size
        if position + length > len(data):
            raise MetadataFormatError(f"Metadata truncated: section {tag} needs {length} bytes")
        try:
            section = Section(tag)
        except ValueError:
            raise MetadataFormatError(f"Unknown metadata section {tag}")
        try:
            bodies[section] = msgpack.unpackb(data[position:position + length], raw=False)
        except (msgpack.UnpackException, ValueError) as exc:
            raise MetadataFormatError(f"Corrupt metadata section {section.name}: {exc}")
        position += length
    if position != len(data):
        raise MetadataFormatError(f"{len(data) - position} trailing bytes after metadata sections")

    try:
        return ObjectPointerTable(
            build_hash=build_hash,
            objects={
                sid: tuple(_decode_record(raw) for raw in records)
                for sid, records in bodies.get(Section.OBJECTS, [])
            },
            object_layouts={
                sid: ObjectLayout(static_id=sid, typed=typed, pointer_offsets=tuple(offsets))
                for sid, typed, offsets in bodies.get(Section.OBJECT_LAYOUTS, [])
            },
            globals=tuple(
                GlobalLayout(index=index, name=name, size=size, pointer_offsets=tuple(offsets))
                for index, name, size, offsets in bodies.get(Section.GLOBALS, [])
            ),
            functions=tuple(
                FunctionLayout(
                    function_id=function_id,
                    name=name,
                    slots=tuple(
                        SlotLayout(slot_id=slot_id, size=size, pointer_offsets=tuple(offsets))
                        for slot_id, size, offsets in slots
                    ),
                )
                for function_id, name, slots in bodies.get(Section.FUNCTIONS, [])
            ),
        )
    except (TypeError, ValueError) as exc:
        raise MetadataFormatError(f"Malformed metadata contents: {exc}")


def write_tables(table: ObjectPointerTable, path: Path) -> None:
    path.write_bytes(serialize_tables(table))


def read_tables(path: Path) -> ObjectPointerTable:
    return deserialize_tables(path.read_bytes())
