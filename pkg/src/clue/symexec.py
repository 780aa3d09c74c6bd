"""Bounded symbolic execution over a constant-propagation lattice.

Each stack word is either an exact 256-bit value or a symbolic value tagged
with where it came from. That is enough to decide whether the target operand
of an external call is a fixed address, without any constraint solving.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from clue.disasm import Program
from clue.model import Address
from clue.opcodes import CALL_OPS, OPCODES

WORD = 1 << 256
MASK160 = (1 << 160) - 1

CALLDATA = "calldata"
STORAGE = "storage"
ENV = "env"
MEMORY = "memory"
UNKNOWN = "unknown"

CONFIRMED = "confirmed"
REFUTED = "refuted"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class SymValue:
    word: Optional[int] = None
    origin: Optional[str] = None

    @staticmethod
    def concrete(word: int) -> SymValue:
        return SymValue(word % WORD, None)

    @staticmethod
    def symbolic(origin: str) -> SymValue:
        return SymValue(None, origin)

    @property
    def is_concrete(self) -> bool:
        return self.word is not None

    def __str__(self) -> str:
        if self.is_concrete:
            return f"0x{self.word:040x}" if self.word <= MASK160 else hex(self.word)
        return f"symbolic:{self.origin}"


def join_origins(values) -> str:
    origins = {v.origin for v in values if not v.is_concrete}
    return origins.pop() if len(origins) == 1 else UNKNOWN


@dataclass(frozen=True)
class ExternalCallSite:
    pc: int
    opcode: str
    target: SymValue
    path_id: int


@dataclass(frozen=True)
class ExecConfig:
    max_paths: int = 256
    max_steps_per_path: int = 50_000
    max_loop_iterations: int = 8

    def __post_init__(self) -> None:
        if min(self.max_paths, self.max_steps_per_path, self.max_loop_iterations) <= 0:
            raise ValueError("execution bounds must be positive")


@dataclass
class ExecutionReport:
    call_sites: list[ExternalCallSite] = field(default_factory=list)
    paths_explored: int = 0
    truncated: bool = False
    # paths ended by a JUMP/JUMPI to a data-dependent destination
    symbolic_jumps: int = 0


def _byte(i: int, x: int) -> int:
    return (x >> (8 * (31 - i))) & 0xFF if i < 32 else 0


# Exact concrete semantics; ops missing here return symbolic(unknown) even on concrete input.
_CONCRETE: dict[str, Callable[..., int]] = {
    "ADD": lambda a, b: a + b,
    "MUL": lambda a, b: a * b,
    "SUB": lambda a, b: a - b,
    "DIV": lambda a, b: a // b if b else 0,
    "MOD": lambda a, b: a % b if b else 0,
    "ADDMOD": lambda a, b, n: (a + b) % n if n else 0,
    "MULMOD": lambda a, b, n: (a * b) % n if n else 0,
    "LT": lambda a, b: int(a < b),
    "GT": lambda a, b: int(a > b),
    "EQ": lambda a, b: int(a == b),
    "ISZERO": lambda a: int(a == 0),
    "AND": lambda a, b: a & b,
    "OR": lambda a, b: a | b,
    "XOR": lambda a, b: a ^ b,
    "NOT": lambda a: a ^ (WORD - 1),
    "BYTE": _byte,
    "SHL": lambda s, x: x << s if s < 256 else 0,
    "SHR": lambda s, x: x >> s if s < 256 else 0,
}

_UNKNOWN_RESULT = frozenset({"SDIV", "SMOD", "SLT", "SGT", "SIGNEXTEND", "SAR", "EXP", "SHA3"})

_ENV_SOURCES = {
    "CALLDATALOAD": CALLDATA,
    "CALLDATASIZE": CALLDATA,
    "SLOAD": STORAGE,
    "RETURNDATASIZE": UNKNOWN,
    "CREATE": UNKNOWN,
    "CREATE2": UNKNOWN,
}
for _name in (
    "ADDRESS", "BALANCE", "ORIGIN", "CALLER", "CALLVALUE", "GASPRICE", "EXTCODESIZE",
    "EXTCODEHASH", "BLOCKHASH", "COINBASE", "TIMESTAMP", "NUMBER", "DIFFICULTY",
    "GASLIMIT", "CHAINID", "SELFBALANCE", "MSIZE", "GAS",
):
    _ENV_SOURCES[_name] = ENV

# memory-writing ops: (index of offset operand, index of size operand) in pop order
_MEM_WRITES = {
    "CALLDATACOPY": (0, 2),
    "CODECOPY": (0, 2),
    "RETURNDATACOPY": (0, 2),
    "EXTCODECOPY": (1, 3),
    "CALL": (5, 6),
    "CALLCODE": (5, 6),
    "DELEGATECALL": (4, 5),
    "STATICCALL": (4, 5),
}

_HALTS = frozenset({"STOP", "RETURN", "REVERT", "INVALID", "SELFDESTRUCT"})


@dataclass
class _Path:
    path_id: int
    pc: int = 0
    stack: list[SymValue] = field(default_factory=list)
    # concrete offset -> word written there by MSTORE
    memory: dict[int, SymValue] = field(default_factory=dict)
    visits: dict[int, int] = field(default_factory=dict)
    steps: int = 0

    def fork(self, path_id: int, pc: int) -> _Path:
        return _Path(path_id, pc, list(self.stack), dict(self.memory), dict(self.visits), self.steps)


def _invalidate(memory: dict[int, SymValue], start: SymValue, size: SymValue) -> None:
    if not (start.is_concrete and size.is_concrete):
        memory.clear()
        return
    a, n = start.word, size.word
    if n == 0:
        return
    for k in [k for k in memory if k < a + n and a < k + 32]:
        del memory[k]


def execute(program: Program, config: ExecConfig = ExecConfig()) -> ExecutionReport:
    """Depth-first exploration from offset 0, recording every external call."""
    report = ExecutionReport()
    worklist = [_Path(0)]
    report.paths_explored = 1
    code_size = len(program.code)

    def spawn(parent: _Path, dest: int) -> None:
        if report.paths_explored >= config.max_paths:
            report.truncated = True
            return
        child = parent.fork(report.paths_explored, dest)
        report.paths_explored += 1
        if _enter(child, dest, config, report):
            worklist.append(child)

    while worklist:
        path = worklist.pop()
        _run_path(program, config, path, report, spawn, code_size)
    return report


def _enter(path: _Path, dest: int, config: ExecConfig, report: ExecutionReport) -> bool:
    count = path.visits.get(dest, 0) + 1
    path.visits[dest] = count
    if count > config.max_loop_iterations:
        report.truncated = True
        return False
    return True


def _run_path(program, config, path, report, spawn, code_size) -> None:
    stack = path.stack
    memory = path.memory
    while True:
        ins = program.at(path.pc)
        if ins is None:
            return  # ran off the end: implicit STOP
        path.steps += 1
        if path.steps > config.max_steps_per_path:
            report.truncated = True
            return
        name = ins.mnemonic
        spec = OPCODES.get(ins.opcode)
        if spec is None or name in _HALTS:
            return
        _, n_in, n_out = spec
        if len(stack) < n_in:
            return  # underflow kills only this path
        next_pc = ins.offset + ins.size

        if ins.push_data is not None:
            stack.append(SymValue.concrete(ins.operand))
        elif name.startswith("DUP"):
            stack.append(stack[-n_in])
        elif name.startswith("SWAP"):
            stack[-1], stack[-n_in] = stack[-n_in], stack[-1]
        elif name == "JUMP":
            dest = stack.pop()
            if not dest.is_concrete:
                report.symbolic_jumps += 1
                return
            if dest.word not in program.jumpdests or not _enter(path, dest.word, config, report):
                return
            path.pc = dest.word
            continue
        elif name == "JUMPI":
            dest, cond = stack.pop(), stack.pop()
            if not dest.is_concrete:
                report.symbolic_jumps += 1
                return
            valid = dest.word in program.jumpdests
            if cond.is_concrete:
                if cond.word:
                    if not valid or not _enter(path, dest.word, config, report):
                        return
                    path.pc = dest.word
                    continue
            elif valid:
                spawn(path, dest.word)
        else:
            args = [stack.pop() for _ in range(n_in)]
            if name in CALL_OPS:
                target = args[1]
                if target.is_concrete:
                    target = SymValue.concrete(target.word & MASK160)
                report.call_sites.append(ExternalCallSite(ins.offset, name, target, path.path_id))
            if name in _MEM_WRITES:
                off_i, size_i = _MEM_WRITES[name]
                _invalidate(memory, args[off_i], args[size_i])
            if name == "MSTORE":
                off, val = args
                if off.is_concrete:
                    _invalidate(memory, off, SymValue.concrete(32))
                    if val.is_concrete:
                        memory[off.word] = val
                else:
                    memory.clear()
            elif name == "MSTORE8":
                _invalidate(memory, args[0], SymValue.concrete(1))
            if n_out:
                stack.append(_result(name, args, ins.offset, code_size, memory))
        if len(stack) > 1024:
            return
        path.pc = next_pc


def _result(name: str, args: list[SymValue], pc: int, code_size: int, memory: dict[int, SymValue]) -> SymValue:
    fn = _CONCRETE.get(name)
    if fn is not None:
        if all(a.is_concrete for a in args):
            return SymValue.concrete(fn(*(a.word for a in args)))
        return SymValue.symbolic(join_origins(args))
    if name in _UNKNOWN_RESULT:
        return SymValue.symbolic(UNKNOWN)
    if name == "PC":
        return SymValue.concrete(pc)
    if name == "CODESIZE":
        return SymValue.concrete(code_size)
    if name == "MLOAD":
        off = args[0]
        if off.is_concrete and off.word in memory:
            return memory[off.word]
        return SymValue.symbolic(MEMORY)
    return SymValue.symbolic(_ENV_SOURCES.get(name, UNKNOWN))


def resolve_delegate_target(report: ExecutionReport, library: Address) -> str:
    lib = library.to_int()
    sites = report.call_sites
    if any(s.target.is_concrete and s.target.word == lib for s in sites):
        return CONFIRMED
    if sites and not report.truncated and all(s.target.is_concrete for s in sites):
        return REFUTED
    return INCONCLUSIVE


def cbc_lock_check(report: ExecutionReport, library: Address) -> bool:
    """True when no call can reach anything but the library, so tokens cannot be moved either."""
    lib = library.to_int()
    for s in report.call_sites:
        if s.target.is_concrete and s.target.word != lib:
            return False
        if not s.target.is_concrete and s.target.origin == CALLDATA:
            return False
    return True
