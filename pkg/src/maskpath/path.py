"""Vector path token grammar: tokenize, parse, serialize.

The path language is a subset of the SVG ``d`` attribute: absolute ``M``,
``L``, ``C`` and ``Z``/``z`` commands with integer coordinates in [-39, 999].
A negative coordinate is the two-token sequence ``-`` followed by its
magnitude.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

from maskpath.errors import MaskpathError

COORD_MIN = -39
COORD_MAX = 999
DEFAULT_L_MAX = 1024


class PathError(MaskpathError, ValueError):
    """Base class for grammar violations; the reward treats any of them as an invalid rollout."""


class UnknownCharacter(PathError):
    def __init__(self, position: int, char: str):
        super().__init__(f"unknown character {char!r} at position {position}")
        self.position = position
        self.char = char


class InvalidArity(PathError):
    pass


class DanglingSign(PathError):
    pass


class NoLeadingMove(PathError):
    pass


class TooLong(PathError):
    pass


class EmptyPath(PathError):
    pass


class CoordinateOutOfRange(PathError):
    pass


class Kind(enum.Enum):
    M = "M"
    L = "L"
    C = "C"
    Z = "Z"
    NEG = "-"
    INT = "int"


COMMANDS = (Kind.M, Kind.L, Kind.C, Kind.Z)


@dataclass(frozen=True)
class PathToken:
    kind: Kind
    value: int = 0

    def __post_init__(self):
        if self.kind is Kind.INT and not 0 <= self.value <= COORD_MAX:
            raise CoordinateOutOfRange(f"integer token {self.value} outside [0, {COORD_MAX}]")

    def __str__(self) -> str:
        return str(self.value) if self.kind is Kind.INT else self.kind.value


Point = tuple[int, int]


@dataclass(frozen=True)
class LineTo:
    end: Point


@dataclass(frozen=True)
class CubicTo:
    c1: Point
    c2: Point
    end: Point


Segment = Union[LineTo, CubicTo]


@dataclass(frozen=True)
class Subpath:
    start: Point
    segments: tuple[Segment, ...] = ()
    closed: bool = False


@dataclass(frozen=True)
class VectorPath:
    subpaths: tuple[Subpath, ...] = ()

    def points(self) -> Iterable[Point]:
        for sp in self.subpaths:
            yield sp.start
            for seg in sp.segments:
                if isinstance(seg, CubicTo):
                    yield from (seg.c1, seg.c2, seg.end)
                else:
                    yield seg.end

    @property
    def has_open_subpath(self) -> bool:
        return any(not sp.closed for sp in self.subpaths)


_COMMAND_CHARS = {"M": Kind.M, "L": Kind.L, "C": Kind.C, "Z": Kind.Z, "z": Kind.Z}


def tokenize(text: str) -> list[PathToken]:
    """Split a path string into tokens; whitespace and commas are separators."""
    tokens: list[PathToken] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace() or ch == ",":
            i += 1
        elif ch in _COMMAND_CHARS:
            tokens.append(PathToken(_COMMAND_CHARS[ch]))
            i += 1
        elif ch == "-":
            tokens.append(PathToken(Kind.NEG))
            i += 1
        elif "0" <= ch <= "9":
            j = i
            while j < n and "0" <= text[j] <= "9":
                j += 1
            tokens.append(PathToken(Kind.INT, int(text[i:j])))
            i = j
        else:
            raise UnknownCharacter(i, ch)
    return tokens


def _read_integers(tokens: Sequence[PathToken], pos: int) -> tuple[list[int], int]:
    values = []
    while pos < len(tokens) and tokens[pos].kind not in COMMANDS:
        tok = tokens[pos]
        if tok.kind is Kind.NEG:
            if pos + 1 >= len(tokens) or tokens[pos + 1].kind is not Kind.INT:
                raise DanglingSign(f"'-' at token {pos} is not followed by an integer")
            value = -tokens[pos + 1].value
            pos += 2
        else:
            value = tok.value
            pos += 1
        if not COORD_MIN <= value <= COORD_MAX:
            raise CoordinateOutOfRange(f"coordinate {value} outside [{COORD_MIN}, {COORD_MAX}]")
        values.append(value)
    return values, pos


def _pairs(values: list[int]) -> list[Point]:
    return [(values[k], values[k + 1]) for k in range(0, len(values), 2)]


def parse(tokens: Sequence[PathToken], l_max: int = DEFAULT_L_MAX) -> VectorPath:
    """Group a token stream into subpaths.

    Extra pairs after ``M`` are implicit line-tos. A drawing command needs an
    open subpath, so ``L``/``C``/``Z`` right after ``Z`` (without a new ``M``)
    raise :class:`NoLeadingMove`.
    """
    if len(tokens) > l_max:
        raise TooLong(f"{len(tokens)} tokens exceed the limit of {l_max}")
    if not tokens:
        raise EmptyPath("path has no tokens")
    if tokens[0].kind is not Kind.M:
        raise NoLeadingMove(f"path starts with {tokens[0]} instead of M")

    subpaths: list[Subpath] = []
    start: Optional[Point] = None
    segments: list[Segment] = []

    def flush(closed: bool) -> None:
        subpaths.append(Subpath(start, tuple(segments), closed))

    pos = 0
    while pos < len(tokens):
        cmd = tokens[pos].kind
        values, nxt = _read_integers(tokens, pos + 1)
        if cmd is Kind.Z:
            if values:
                raise InvalidArity(f"Z takes no coordinates, got {len(values)}")
            if start is None:
                raise NoLeadingMove(f"Z at token {pos} has no open subpath")
            flush(closed=True)
            start, segments = None, []
        elif cmd is Kind.M:
            if not values or len(values) % 2:
                raise InvalidArity(f"M needs a positive even number of integers, got {len(values)}")
            if start is not None:
                flush(closed=False)
            pts = _pairs(values)
            start, segments = pts[0], [LineTo(p) for p in pts[1:]]
        else:
            if start is None:
                raise NoLeadingMove(f"{cmd.value} at token {pos} has no open subpath")
            if cmd is Kind.L:
                if not values or len(values) % 2:
                    raise InvalidArity(f"L needs a positive even number of integers, got {len(values)}")
                segments.extend(LineTo(p) for p in _pairs(values))
            else:
                if not values or len(values) % 6:
                    raise InvalidArity(f"C needs triples of pairs, got {len(values)} integers")
                pts = _pairs(values)
                segments.extend(CubicTo(*pts[k : k + 3]) for k in range(0, len(pts), 3))
        pos = nxt
    if start is not None:
        flush(closed=False)
    return VectorPath(tuple(subpaths))


def parse_text(text: str, l_max: int = DEFAULT_L_MAX) -> VectorPath:
    return parse(tokenize(text), l_max=l_max)


def _point_tokens(p: Point) -> list[PathToken]:
    out = []
    for v in p:
        if v < 0:
            out.append(PathToken(Kind.NEG))
        out.append(PathToken(Kind.INT, abs(v)))
    return out


def to_tokens(path: VectorPath) -> list[PathToken]:
    """Canonical token stream: every segment carries its own command."""
    out: list[PathToken] = []
    for sp in path.subpaths:
        out.append(PathToken(Kind.M))
        out.extend(_point_tokens(sp.start))
        for seg in sp.segments:
            if isinstance(seg, CubicTo):
                out.append(PathToken(Kind.C))
                for p in (seg.c1, seg.c2, seg.end):
                    out.extend(_point_tokens(p))
            else:
                out.append(PathToken(Kind.L))
                out.extend(_point_tokens(seg.end))
        if sp.closed:
            out.append(PathToken(Kind.Z))
    return out


def serialize_d(path: VectorPath) -> str:
    """Canonical SVG ``d`` string, e.g. ``"M 0 0 L 960 0 L 960 960 Z"``."""
    parts: list[str] = []
    pending_sign = False
    for tok in to_tokens(path):
        if tok.kind is Kind.NEG:
            pending_sign = True
            continue
        s = str(tok)
        if pending_sign:
            s = "-" + s
            pending_sign = False
        parts.append(s)
    return " ".join(parts)


def path_len(path: VectorPath) -> int:
    """Number of tokens in the canonical form, minus signs included."""
    n = 0
    for sp in path.subpaths:
        n += 1 + 2 + (sp.start[0] < 0) + (sp.start[1] < 0)
        for seg in sp.segments:
            pts = (seg.c1, seg.c2, seg.end) if isinstance(seg, CubicTo) else (seg.end,)
            n += 1 + sum(2 + (x < 0) + (y < 0) for x, y in pts)
        n += sp.closed
    return n


# ---------------------------------------------------------------------------
# full segmentation query layout


@dataclass
class SequenceLayout:
    """One serialized segmentation query: prompt, expression, answer box and path."""

    expression: str
    answer_box: tuple[float, float, float, float]
    path: VectorPath
    mode: str = "segment"
    prompt_point: Optional[tuple[float, float]] = None
    prompt_box: Optional[tuple[float, float, float, float]] = None

    def __post_init__(self):
        if self.prompt_point is not None and self.prompt_box is not None:
            raise ValueError("spatial prompt is either a point or a box, not both")

    def to_dict(self) -> dict:
        prompt = {}
        if self.prompt_point is not None:
            prompt = {"point": list(self.prompt_point)}
        elif self.prompt_box is not None:
            prompt = {"box": list(self.prompt_box)}
        out = {"mode": self.mode}
        if prompt:
            out["prompt"] = prompt
        out["expression"] = self.expression
        out["box"] = list(self.answer_box)
        out["path"] = serialize_d(self.path)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict, l_max: int = DEFAULT_L_MAX) -> "SequenceLayout":
        prompt = data.get("prompt") or {}
        point = prompt.get("point")
        box = prompt.get("box")
        if point is not None and len(point) != 2:
            raise ValueError("point prompt needs 2 coordinates")
        if box is not None and len(box) != 4:
            raise ValueError("box prompt needs 4 values")
        answer = data["box"]
        if len(answer) != 4:
            raise ValueError("answer box needs 4 values")
        return cls(
            expression=data["expression"],
            answer_box=tuple(float(v) for v in answer),
            path=parse_text(data["path"], l_max=l_max),
            mode=data.get("mode", "segment"),
            prompt_point=tuple(point) if point is not None else None,
            prompt_box=tuple(box) if box is not None else None,
        )

    @classmethod
    def from_json(cls, text: str, l_max: int = DEFAULT_L_MAX) -> "SequenceLayout":
        return cls.from_dict(json.loads(text), l_max=l_max)
