"""Lexer, parser, validator and serializer for the multi-borders control language.

Grammar::

    branch         ::= model "{" branch-list "}" | CLASS
    model          ::= TWOCLASS | partition-list
    branch-list    ::= branch | branch-list branch
    partition-list ::= partition | partition-list partition
    partition      ::= TWOCLASS class-list "/" class-list ";"
    class-list     ::= CLASS | class-list CLASS

TWOCLASS is a double-quoted option string in the training dialect and a
model file name in the classification dialect.  Lines whose first
non-blank character is ``#`` are comments.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Iterator, Union


class Dialect(enum.Enum):
    TRAINING = "training"
    CLASSIFICATION = "classification"


class TokenKind(enum.Enum):
    QUOTED_STRING = "quoted string"
    NAME = "model name"
    INTEGER = "class"
    LBRACE = "'{'"
    RBRACE = "'}'"
    SLASH = "'/'"
    SEMICOLON = "';'"
    END = "end of input"


@dataclass(frozen=True)
class Position:
    line: int
    column: int

    def __str__(self):
        return f"line {self.line}, column {self.column}"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str
    position: Position

    @property
    def value(self) -> int:
        return int(self.text)


class ControlLanguageError(Exception):
    """Base class for lexing and parsing failures; carries a position."""

    def __init__(self, message: str, position: Position | None = None):
        self.message = message
        self.position = position
        where = f"{position}: " if position is not None else ""
        super().__init__(where + message)


class UnterminatedString(ControlLanguageError):
    pass


class IllegalCharacter(ControlLanguageError):
    pass


class ControlSyntaxError(ControlLanguageError):
    def __init__(self, message, position=None, expected=()):
        self.expected = frozenset(expected)
        if self.expected:
            names = ", ".join(sorted(k.value for k in self.expected))
            message = f"{message} (expected one of: {names})"
        super().__init__(message, position)


class TrailingTokens(ControlSyntaxError):
    pass


class DialectMismatch(ControlLanguageError):
    pass


# --- AST -------------------------------------------------------------------


@dataclass(frozen=True)
class TrainingOptions:
    options: str = ""


@dataclass(frozen=True)
class ModelName:
    path: str


ModelSpec = Union[TrainingOptions, ModelName]


@dataclass(frozen=True)
class Partition:
    """One binary split over the local classes of a partition node."""

    spec: ModelSpec
    side1: tuple[int, ...]
    side2: tuple[int, ...]

    @property
    def indices(self) -> frozenset[int]:
        return frozenset(self.side1) | frozenset(self.side2)


@dataclass(frozen=True)
class Leaf:
    cls: int


@dataclass(frozen=True)
class TwoClassNode:
    spec: ModelSpec
    children: tuple[ControlNode, ...]


@dataclass(frozen=True)
class PartitionNode:
    partitions: tuple[Partition, ...]
    children: tuple[ControlNode, ...]

    @property
    def n_local(self) -> int:
        """Number of local classes implied by the partitions (1 + max index)."""
        return 1 + max(max(p.indices) for p in self.partitions)


ControlNode = Union[Leaf, TwoClassNode, PartitionNode]


def iter_nodes(root: ControlNode, path: str = "0") -> Iterator[tuple[str, ControlNode]]:
    """Depth-first (pre-order) walk yielding ``(node_path, node)``.

    The root has path ``"0"``; child ``k`` of a node at path ``P`` has path ``P.k``.
    """
    yield path, root
    for k, child in enumerate(getattr(root, "children", ())):
        yield from iter_nodes(child, f"{path}.{k}")


def iter_specs(root: ControlNode) -> Iterator[ModelSpec]:
    for _, node in iter_nodes(root):
        if isinstance(node, TwoClassNode):
            yield node.spec
        elif isinstance(node, PartitionNode):
            for p in node.partitions:
                yield p.spec


def leaf_classes(root: ControlNode) -> list[int]:
    return [node.cls for _, node in iter_nodes(root) if isinstance(node, Leaf)]


# --- lexer -----------------------------------------------------------------

_PUNCT = {"{": TokenKind.LBRACE, "}": TokenKind.RBRACE, ";": TokenKind.SEMICOLON}
_WORD_STOP = set('{};"') | set(" \t\r\n\f\v")
_DIGITS_AND_SLASHES = re.compile(r"[0-9/]+")


def tokenize(text: str) -> list[Token]:
    """Split control-file text into tokens.

    A bare word made only of digits and slashes is split into INTEGER and
    SLASH tokens, so ``0/1`` lexes the same as ``0 / 1``.  Any other bare word
    is a NAME; slashes inside it are kept so that model paths work.
    """
    tokens = []
    line, col = 1, 1
    i, n = 0, len(text)
    at_line_start = True

    def advance(ch):
        nonlocal line, col
        if ch == "\n":
            line, col = line + 1, 1
        else:
            col += 1

    while i < n:
        ch = text[i]
        if ch in " \t\r\f\v\n":
            if ch == "\n":
                at_line_start = True
            advance(ch)
            i += 1
            continue
        if ch == "#" and at_line_start:
            while i < n and text[i] != "\n":
                i += 1
                col += 1
            continue
        at_line_start = False
        start = Position(line, col)
        if ch in _PUNCT:
            tokens.append(Token(_PUNCT[ch], ch, start))
            advance(ch)
            i += 1
        elif ch == '"':
            advance(ch)
            i += 1
            chars = []
            while True:
                if i >= n:
                    raise UnterminatedString("unterminated quoted string", start)
                ch = text[i]
                if ch == "\\" and i + 1 < n and text[i + 1] == '"':
                    chars.append('"')
                    advance("\\")
                    advance('"')
                    i += 2
                    continue
                advance(ch)
                i += 1
                if ch == '"':
                    break
                chars.append(ch)
            tokens.append(Token(TokenKind.QUOTED_STRING, "".join(chars), start))
        else:
            j = i
            while j < n and text[j] not in _WORD_STOP:
                if not text[j].isprintable():
                    raise IllegalCharacter(
                        f"illegal character {text[j]!r}", Position(line, col + (j - i))
                    )
                j += 1
            word = text[i:j]
            if _DIGITS_AND_SLASHES.fullmatch(word):
                for m in re.finditer(r"[0-9]+|/", word):
                    pos = Position(line, col + m.start())
                    if m.group() == "/":
                        tokens.append(Token(TokenKind.SLASH, "/", pos))
                    else:
                        tokens.append(Token(TokenKind.INTEGER, m.group(), pos))
            else:
                tokens.append(Token(TokenKind.NAME, word, start))
            col += j - i
            i = j
    tokens.append(Token(TokenKind.END, "", Position(line, col)))
    return tokens


# --- parser ----------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[Token], dialect: Dialect):
        if not tokens or tokens[-1].kind is not TokenKind.END:
            last = tokens[-1].position if tokens else Position(1, 1)
            tokens = list(tokens) + [Token(TokenKind.END, "", last)]
        self.tokens = tokens
        self.dialect = dialect
        self.i = 0

    def peek(self, offset=0) -> Token:
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def take(self, *kinds: TokenKind) -> Token:
        tok = self.peek()
        if tok.kind not in kinds:
            found = "end of input" if tok.kind is TokenKind.END else repr(tok.text)
            raise ControlSyntaxError(f"unexpected {found}", tok.position, kinds)
        self.i += 1
        return tok

    def model_kinds(self):
        if self.dialect is Dialect.TRAINING:
            return TokenKind.QUOTED_STRING, TokenKind.NAME
        return TokenKind.NAME, TokenKind.QUOTED_STRING

    def spec(self) -> ModelSpec:
        tok = self.peek()
        good, bad = self.model_kinds()
        if tok.kind is bad:
            want = "a quoted option string" if good is TokenKind.QUOTED_STRING else "a model name"
            raise DialectMismatch(
                f"{self.dialect.value} dialect expects {want} here, found {tok.text!r}",
                tok.position,
            )
        self.take(good)
        if good is TokenKind.QUOTED_STRING:
            return TrainingOptions(tok.text)
        return ModelName(tok.text)

    def branch(self) -> ControlNode:
        tok = self.peek()
        if tok.kind is TokenKind.INTEGER:
            if self.peek(1).kind is TokenKind.LBRACE:
                raise DialectMismatch(
                    f"class value {tok.text} used as a binary model", tok.position
                )
            self.i += 1
            return Leaf(tok.value)
        if tok.kind not in (TokenKind.QUOTED_STRING, TokenKind.NAME):
            good, _ = self.model_kinds()
            raise ControlSyntaxError(
                f"unexpected {tok.text or 'end of input'!r}",
                tok.position,
                (good, TokenKind.INTEGER),
            )
        spec = self.spec()
        if self.peek().kind is TokenKind.LBRACE:
            return TwoClassNode(spec, self.branch_list())
        partitions = [self.partition_tail(spec)]
        while self.peek().kind is not TokenKind.LBRACE:
            partitions.append(self.partition_tail(self.spec_or_brace()))
        return PartitionNode(tuple(partitions), self.branch_list())

    def spec_or_brace(self) -> ModelSpec:
        tok = self.peek()
        good, bad = self.model_kinds()
        if tok.kind not in (good, bad):
            raise ControlSyntaxError(
                f"unexpected {tok.text or 'end of input'!r}", tok.position, (good, TokenKind.LBRACE)
            )
        return self.spec()

    def class_list(self) -> tuple[int, ...]:
        values = [self.take(TokenKind.INTEGER).value]
        while self.peek().kind is TokenKind.INTEGER:
            values.append(self.take(TokenKind.INTEGER).value)
        return tuple(values)

    def partition_tail(self, spec: ModelSpec) -> Partition:
        side1 = self.class_list()
        tok = self.peek()
        if tok.kind is not TokenKind.SLASH:
            raise ControlSyntaxError(
                f"unexpected {tok.text or 'end of input'!r}",
                tok.position,
                (TokenKind.INTEGER, TokenKind.SLASH),
            )
        self.i += 1
        side2 = self.class_list()
        tok = self.peek()
        if tok.kind is not TokenKind.SEMICOLON:
            raise ControlSyntaxError(
                f"unexpected {tok.text or 'end of input'!r}",
                tok.position,
                (TokenKind.INTEGER, TokenKind.SEMICOLON),
            )
        self.i += 1
        return Partition(spec, side1, side2)

    def branch_list(self) -> tuple[ControlNode, ...]:
        self.take(TokenKind.LBRACE)
        children = [self.branch()]
        while self.peek().kind is not TokenKind.RBRACE:
            tok = self.peek()
            if tok.kind not in (TokenKind.INTEGER, TokenKind.QUOTED_STRING, TokenKind.NAME):
                raise ControlSyntaxError(
                    f"unexpected {tok.text or 'end of input'!r}",
                    tok.position,
                    (self.model_kinds()[0], TokenKind.INTEGER, TokenKind.RBRACE),
                )
            children.append(self.branch())
        self.take(TokenKind.RBRACE)
        return tuple(children)

    def parse(self) -> ControlNode:
        root = self.branch()
        tok = self.peek()
        if tok.kind is not TokenKind.END:
            raise TrailingTokens(
                f"input continues past the root branch at {tok.text!r}",
                tok.position,
                (TokenKind.END,),
            )
        return root


def parse(tokens: list[Token], dialect: Dialect = Dialect.TRAINING) -> ControlNode:
    """Parse a token list into a control tree (a single ``<branch>``)."""
    return _Parser(tokens, Dialect(dialect)).parse()


def loads(text: str, dialect: Dialect = Dialect.TRAINING) -> ControlNode:
    return parse(tokenize(text), dialect)


def load(path, dialect: Dialect = Dialect.TRAINING) -> ControlNode:
    with open(path, encoding="utf-8") as f:
        return loads(f.read(), dialect)


# --- validation ------------------------------------------------------------


class ViolationKind(enum.Enum):
    CLASS_OUT_OF_RANGE = "ClassOutOfRange"
    CHILD_COUNT_MISMATCH = "ChildCountMismatch"
    DUPLICATE_CLASS = "DuplicateClass"
    MISSING_CLASS = "MissingClass"
    OVERLAPPING_SIDES = "OverlappingSides"
    DUPLICATE_INDEX = "DuplicateIndex"
    ORPHAN_CHILD = "OrphanChild"
    NON_SPLITTING = "NonSplittingPartition"
    EMPTY_SIDE = "EmptySide"
    MIXED_DIALECT = "MixedDialect"
    # warning only
    OMITTED_CLASS = "OmittedClass"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    path: str
    message: str

    def __str__(self):
        return f"{self.kind.value} at node {self.path}: {self.message}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)
    warnings: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set[ViolationKind]:
        return {v.kind for v in self.violations}

    def __bool__(self):
        return self.ok


def validate(root: ControlNode, n_classes: int, allow_duplicates: bool = False) -> ValidationReport:
    """Check a parsed tree against ``n_classes`` absolute classes.

    All problems are collected; nothing is raised.  Partitions that leave out
    some of their node's local classes are legal but produce a warning.
    """
    report = ValidationReport()
    bad = report.violations.append

    kinds = {type(s) for s in iter_specs(root)}
    if len(kinds) > 1:
        bad(Violation(ViolationKind.MIXED_DIALECT, "0", "tree mixes option strings and model names"))

    seen: dict[int, str] = {}
    for path, node in iter_nodes(root):
        if isinstance(node, Leaf):
            if not 0 <= node.cls < n_classes:
                bad(Violation(ViolationKind.CLASS_OUT_OF_RANGE, path,
                              f"class {node.cls} not in [0, {n_classes})"))
            elif node.cls in seen and not allow_duplicates:
                bad(Violation(ViolationKind.DUPLICATE_CLASS, path,
                              f"class {node.cls} already returned at node {seen[node.cls]}"))
            seen.setdefault(node.cls, path)
        elif isinstance(node, TwoClassNode):
            if len(node.children) != 2:
                bad(Violation(ViolationKind.CHILD_COUNT_MISMATCH, path,
                              f"two-class node has {len(node.children)} branches, needs 2"))
        else:
            _check_partition_node(node, path, report)

    for c in range(n_classes):
        if c not in seen:
            bad(Violation(ViolationKind.MISSING_CLASS, "0", f"class {c} is not returned by any leaf"))
    return report


def _check_partition_node(node: PartitionNode, path: str, report: ValidationReport):
    bad = report.violations.append
    used: set[int] = set()
    for i, p in enumerate(node.partitions):
        where = f"{path} (partition {i})"
        if not p.side1 or not p.side2:
            bad(Violation(ViolationKind.EMPTY_SIDE, where, "partition side is empty"))
            continue
        if min(p.side1 + p.side2) < 0:
            bad(Violation(ViolationKind.CLASS_OUT_OF_RANGE, where, "negative local class index"))
        if len(set(p.side1)) != len(p.side1) or len(set(p.side2)) != len(p.side2):
            bad(Violation(ViolationKind.DUPLICATE_INDEX, where, "class listed twice on one side"))
        overlap = set(p.side1) & set(p.side2)
        if overlap:
            bad(Violation(ViolationKind.OVERLAPPING_SIDES, where,
                          f"classes {sorted(overlap)} on both sides"))
        used |= p.indices
    if not used:
        return
    n_local = 1 + max(used)
    if len(node.children) != n_local:
        bad(Violation(ViolationKind.CHILD_COUNT_MISMATCH, path,
                      f"partitions reference {n_local} local classes but there are "
                      f"{len(node.children)} branches"))
    orphans = sorted(set(range(n_local)) - used)
    if orphans:
        bad(Violation(ViolationKind.ORPHAN_CHILD, path,
                      f"local classes {orphans} appear in no partition"))
    if len(used) < 2:
        bad(Violation(ViolationKind.NON_SPLITTING, path, "partitions reference only one class"))
    for i, p in enumerate(node.partitions):
        omitted = sorted(used - p.indices)
        if omitted:
            report.warnings.append(Violation(ViolationKind.OMITTED_CLASS, f"{path} (partition {i})",
                                             f"local classes {omitted} not on either side"))


# --- serialization ---------------------------------------------------------


def _format_spec(spec: ModelSpec) -> str:
    if isinstance(spec, TrainingOptions):
        if spec.options.endswith("\\"):
            raise ValueError("option string cannot end in a backslash")
        return '"' + spec.options.replace('"', '\\"') + '"'
    name = spec.path
    if not name or any(c.isspace() or c in '{};"' for c in name) or _DIGITS_AND_SLASHES.fullmatch(name):
        raise ValueError(f"model name {name!r} cannot be written in the control language")
    return name


def _format_partition(p: Partition) -> str:
    return (f"{_format_spec(p.spec)} {' '.join(map(str, p.side1))} / "
            f"{' '.join(map(str, p.side2))};")


def _lines(node: ControlNode, depth: int) -> list[str]:
    pad = "  " * depth
    if isinstance(node, Leaf):
        return [f"{pad}{node.cls}"]
    if isinstance(node, TwoClassNode):
        head = [f"{pad}{_format_spec(node.spec)} "]
    else:
        head = [f"{pad}{_format_partition(p)}" for p in node.partitions] + [pad]
    if all(isinstance(c, Leaf) for c in node.children):
        head[-1] += "{" + " ".join(str(c.cls) for c in node.children) + "}"
        return head
    head[-1] += "{"
    for child in node.children:
        head.extend(_lines(child, depth + 1))
    head.append(pad + "}")
    return head


def serialize(root: ControlNode) -> str:
    """Canonical text for a tree: two-space indent per level, one partition per line."""
    return "\n".join(_lines(root, 0))
