"""Runtime values: sorts, exact arithmetic, canonical rendering, structural diff.

Attribute values are plain Python data: ``int`` (arbitrary precision),
``fractions.Fraction`` (exact rationals, always normalized), ``bool``,
``str``, ``tuple`` for lists, and ``dict`` for string-keyed maps.
Rendering is canonical (rationals as ``p/q``, map keys sorted) so golden
tests and wire payloads compare bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Union

INT = "int"
RATIONAL = "rational"
BOOL = "bool"
STRING = "string"
LIST = "list"
MAP = "map"
# Internal sort for builtins whose result depends on runtime data
# (map_lookup into a heterogeneous map); compatible with every sort.
ANY = "any"

SORTS = (INT, RATIONAL, BOOL, STRING, LIST, MAP)

Value = Union[int, Fraction, bool, str, tuple, dict]


class Undefined:
    """Singleton marker for attribute instances left without a value."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "Undefined"


UNDEFINED = Undefined()


def value_sort(v: Value) -> str:
    if isinstance(v, bool):
        return BOOL
    if isinstance(v, int):
        return INT
    if isinstance(v, Fraction):
        return RATIONAL
    if isinstance(v, str):
        return STRING
    if isinstance(v, tuple):
        return LIST
    if isinstance(v, dict):
        return MAP
    raise TypeError(f"not an attribute value: {v!r}")


def sorts_compatible(have: str, want: str) -> bool:
    """Whether a value of sort `have` may flow where `want` is expected.

    Integers widen to rationals (Fig.-1-style grammars write integer
    literals into rational attributes); ANY is compatible both ways.
    """
    if have == want or ANY in (have, want):
        return True
    return have == INT and want == RATIONAL


def coerce(v: Value, want: str) -> Value:
    if want == RATIONAL and isinstance(v, int) and not isinstance(v, bool):
        return Fraction(v)
    return v


def values_equal(a, b) -> bool:
    """Exact, sort-aware equality (True != 1, 1 != Fraction(1) only if sorts differ)."""
    if a is UNDEFINED or b is UNDEFINED:
        return a is b
    if value_sort(a) != value_sort(b):
        return False
    if isinstance(a, tuple):
        return len(a) == len(b) and all(values_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, dict):
        return set(a) == set(b) and all(values_equal(a[k], b[k]) for k in a)
    return a == b


def render_value(v) -> str:
    """Canonical text form: rationals `p/q` (integer when q=1), strings quoted,
    lists `[...]`, maps `{key: value}` with keys sorted."""
    if v is UNDEFINED:
        return "undefined"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, Fraction):
        if v.denominator == 1:
            return str(v.numerator)
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, tuple):
        return "[" + ", ".join(render_value(x) for x in v) + "]"
    if isinstance(v, dict):
        items = ", ".join(f"{k}: {render_value(v[k])}" for k in sorted(v))
        return "{" + items + "}"
    raise TypeError(f"not an attribute value: {v!r}")


@dataclass(frozen=True)
class DiffEdit:
    path: str  # "" is the root, ".key" descends into maps, "[i]" into lists
    kind: str  # added | removed | changed
    a: str | None
    b: str | None


@dataclass(frozen=True)
class DiffReport:
    edits: tuple[DiffEdit, ...]

    @property
    def empty(self) -> bool:
        return not self.edits


def diff_values(a: Value, b: Value) -> DiffReport:
    """Structural edit summary between two values; empty iff they are equal."""
    edits: list[DiffEdit] = []
    _diff(a, b, "", edits)
    return DiffReport(tuple(edits))


def _diff(a, b, path, edits):
    if value_sort(a) != value_sort(b):
        edits.append(DiffEdit(path, "changed", render_value(a), render_value(b)))
        return
    if isinstance(a, dict):
        for k in sorted(set(a) | set(b)):
            sub = f"{path}.{k}"
            if k not in a:
                edits.append(DiffEdit(sub, "added", None, render_value(b[k])))
            elif k not in b:
                edits.append(DiffEdit(sub, "removed", render_value(a[k]), None))
            else:
                _diff(a[k], b[k], sub, edits)
        return
    if isinstance(a, tuple):
        for i in range(max(len(a), len(b))):
            sub = f"{path}[{i}]"
            if i >= len(a):
                edits.append(DiffEdit(sub, "added", None, render_value(b[i])))
            elif i >= len(b):
                edits.append(DiffEdit(sub, "removed", render_value(a[i]), None))
            else:
                _diff(a[i], b[i], sub, edits)
        return
    if a != b:
        edits.append(DiffEdit(path, "changed", render_value(a), render_value(b)))
