"""Linear-sweep EVM disassembler and the embedded-address screen."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from clue.model import Address
from clue.opcodes import BY_NAME, mnemonic, push_size


@dataclass(frozen=True)
class Instruction:
    offset: int
    opcode: int
    mnemonic: str
    # zero-padded to the full PUSH width when the code ends mid-payload
    push_data: Optional[bytes] = None
    truncated: bool = False
    # bytes actually consumed from the code
    size: int = 1

    @property
    def operand(self) -> Optional[int]:
        return None if self.push_data is None else int.from_bytes(self.push_data, "big")

    def __str__(self) -> str:
        text = f"{self.offset:04x}: {self.mnemonic}"
        if self.push_data is not None:
            text += " 0x" + self.push_data.hex()
        return text


@dataclass
class Program:
    code: bytes
    instructions: list[Instruction] = field(default_factory=list)
    jumpdests: frozenset[int] = frozenset()
    # offset -> index into instructions
    index: dict[int, int] = field(default_factory=dict)

    def at(self, offset: int) -> Optional[Instruction]:
        i = self.index.get(offset)
        return None if i is None else self.instructions[i]


def disassemble(code: bytes) -> Program:
    """Decode ``code`` from offset 0. Never raises: unknown bytes become INVALID."""
    code = bytes(code)
    instructions = []
    jumpdests = set()
    offset = 0
    n = len(code)
    while offset < n:
        op = code[offset]
        width = push_size(op)
        if width:
            payload = code[offset + 1 : offset + 1 + width]
            truncated = len(payload) < width
            ins = Instruction(
                offset, op, mnemonic(op), payload.ljust(width, b"\x00"), truncated, 1 + len(payload)
            )
        else:
            ins = Instruction(offset, op, mnemonic(op))
            if op == 0x5B:
                jumpdests.add(offset)
        instructions.append(ins)
        offset += ins.size
    return Program(code, instructions, frozenset(jumpdests), {ins.offset: i for i, ins in enumerate(instructions)})


def reassemble(program: Program) -> bytes:
    out = bytearray()
    for ins in program.instructions:
        out.append(ins.opcode)
        if ins.push_data is not None:
            out += ins.push_data[: ins.size - 1]
    return bytes(out)


def find_push20_constants(program: Program) -> list[tuple[int, Address]]:
    return [(ins.offset, Address(ins.push_data)) for ins in program.instructions if ins.opcode == 0x73]


def screen_hardcoded(program: Program, library: Address) -> bool:
    """Cheap pre-filter: does ``library`` appear as a PUSH20 payload or the low 20 bytes of a wider PUSH?"""
    target = library.raw
    for ins in program.instructions:
        if ins.push_data is not None and len(ins.push_data) >= 20 and ins.push_data[-20:] == target:
            return True
    return False


AsmItem = Union[str, tuple[str, Union[int, bytes, str, Address]]]


def assemble(items: Iterable[AsmItem]) -> bytes:
    """Assemble mnemonics, e.g. ``[("PUSH1", 0), "CALLDATALOAD", ("PUSH20", addr)]``.

    ``("JUMPDEST", "name")`` defines a label at that JUMPDEST and a PUSH
    operand ``"@name"`` resolves to its offset.
    """
    parsed = []
    labels: dict[str, int] = {}
    offset = 0
    for item in items:
        name, arg = (item, None) if isinstance(item, str) else item
        op = BY_NAME[name.upper()]
        if op == 0x5B and isinstance(arg, str):
            labels[arg] = offset
            arg = None
        parsed.append((name, op, arg))
        offset += 1 + push_size(op)

    out = bytearray()
    for name, op, arg in parsed:
        out.append(op)
        width = push_size(op)
        if not width:
            if arg is not None:
                raise ValueError(f"{name} takes no operand")
            continue
        if arg is None:
            raise ValueError(f"{name} needs an operand")
        if isinstance(arg, str) and arg.startswith("@"):
            arg = labels[arg[1:]]
        if isinstance(arg, Address):
            arg = arg.raw
        if isinstance(arg, bytes):
            if len(arg) > width:
                raise ValueError(f"{name} operand too wide")
            out += arg.rjust(width, b"\x00")
        else:
            out += int(arg).to_bytes(width, "big")
    return bytes(out)


def format_listing(program: Program) -> list[str]:
    return [str(ins) for ins in program.instructions]


def parse_hex_code(text: str) -> bytes:
    body = "".join(text.split())
    if body.startswith(("0x", "0X")):
        body = body[2:]
    return bytes.fromhex(body)

