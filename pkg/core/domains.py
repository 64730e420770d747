"""
Kernel Domains
==============
Immutable finite domains for the constraint kernel. Every narrowing returns a
new domain (or None when the domain becomes empty), so the store's trail only
has to remember the previous object.
"""

from dataclasses import dataclass
from typing import Any, FrozenSet, Iterable, Iterator, Optional, Tuple

from .model import sorted_values


@dataclass(frozen=True)
class IntDomain:
    """Integers lo..hi minus a finite exclusion set strictly inside the bounds."""

    lo: int
    hi: int
    excluded: FrozenSet[int] = frozenset()

    @classmethod
    def make(cls, lo: int, hi: int, excluded: Iterable[int] = ()) -> Optional["IntDomain"]:
        """Normalized domain, or None if empty."""
        excluded = frozenset(excluded)
        while lo <= hi and lo in excluded:
            lo += 1
        while hi >= lo and hi in excluded:
            hi -= 1
        if lo > hi:
            return None
        return cls(lo, hi, frozenset(v for v in excluded if lo < v < hi))

    @classmethod
    def of_values(cls, values: Iterable[int]) -> Optional["IntDomain"]:
        values = set(values)
        if not values:
            return None
        lo, hi = min(values), max(values)
        return cls.make(lo, hi, (v for v in range(lo, hi + 1) if v not in values))

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1 - len(self.excluded)

    @property
    def is_fixed(self) -> bool:
        return self.lo == self.hi

    @property
    def value(self) -> int:
        return self.lo

    def contains(self, v: Any) -> bool:
        return isinstance(v, int) and self.lo <= v <= self.hi and v not in self.excluded

    def values(self) -> Iterator[int]:
        for v in range(self.lo, self.hi + 1):
            if v not in self.excluded:
                yield v

    def restrict(self, lo: Optional[int] = None, hi: Optional[int] = None) -> Optional["IntDomain"]:
        new_lo = self.lo if lo is None else max(self.lo, lo)
        new_hi = self.hi if hi is None else min(self.hi, hi)
        if new_lo == self.lo and new_hi == self.hi:
            return self
        return IntDomain.make(new_lo, new_hi, self.excluded)

    def remove(self, v: int) -> Optional["IntDomain"]:
        if not self.contains(v):
            return self
        return IntDomain.make(self.lo, self.hi, self.excluded | {v})

    def keep(self, allowed: Iterable[Any]) -> Optional["IntDomain"]:
        allowed = {v for v in allowed if self.contains(v)}
        if len(allowed) == self.size:
            return self
        return IntDomain.of_values(allowed)

    def intersect(self, other: "IntDomain") -> Optional["IntDomain"]:
        return IntDomain.make(max(self.lo, other.lo), min(self.hi, other.hi), self.excluded | other.excluded)

    def affine(self, sign: int, offset: int) -> "IntDomain":
        """Image under v -> sign * v + offset (sign is 1 or -1)."""
        if sign == 1:
            return IntDomain(self.lo + offset, self.hi + offset, frozenset(v + offset for v in self.excluded))
        return IntDomain(offset - self.hi, offset - self.lo, frozenset(offset - v for v in self.excluded))

    def __str__(self) -> str:
        if self.is_fixed:
            return str(self.lo)
        holes = f"\\{{{','.join(map(str, sorted(self.excluded)))}}}" if self.excluded else ''
        return f"{self.lo}..{self.hi}{holes}"


@dataclass(frozen=True)
class EnumDomain:
    """Candidate values of a carrier-set or BOOL variable, in declaration order."""

    candidates: Tuple[Any, ...]

    @property
    def size(self) -> int:
        return len(self.candidates)

    @property
    def is_fixed(self) -> bool:
        return len(self.candidates) == 1

    @property
    def value(self) -> Any:
        return self.candidates[0]

    def contains(self, v: Any) -> bool:
        return v in self.candidates

    def values(self) -> Iterator[Any]:
        return iter(self.candidates)

    def keep(self, allowed: Iterable[Any]) -> Optional["EnumDomain"]:
        allowed = set(allowed)
        kept = tuple(v for v in self.candidates if v in allowed)
        if len(kept) == len(self.candidates):
            return self
        return EnumDomain(kept) if kept else None

    def remove(self, v: Any) -> Optional["EnumDomain"]:
        if v not in self.candidates:
            return self
        kept = tuple(c for c in self.candidates if c != v)
        return EnumDomain(kept) if kept else None

    def __str__(self) -> str:
        return '{' + ','.join(str(v) for v in self.candidates) + '}'


@dataclass(frozen=True)
class SetDomain:
    """
    A finite set variable: elements of ``must`` are IN, elements outside ``may``
    are OUT, and ``may - must`` are still UNKNOWN.
    """

    must: FrozenSet[Any]
    may: FrozenSet[Any]

    @property
    def unknown(self) -> FrozenSet[Any]:
        return self.may - self.must

    @property
    def is_fixed(self) -> bool:
        return self.must == self.may

    @property
    def value(self) -> FrozenSet[Any]:
        return self.must

    @property
    def size(self) -> int:
        return 2 ** len(self.may - self.must)

    def include(self, elements: Iterable[Any]) -> Optional["SetDomain"]:
        elements = frozenset(elements)
        if elements <= self.must:
            return self
        if not elements <= self.may:
            return None
        return SetDomain(self.must | elements, self.may)

    def exclude(self, elements: Iterable[Any]) -> Optional["SetDomain"]:
        elements = frozenset(elements) & self.may
        if not elements:
            return self
        if elements & self.must:
            return None
        return SetDomain(self.must, self.may - elements)

    def restrict_may(self, allowed: Iterable[Any]) -> Optional["SetDomain"]:
        return self.exclude(self.may - frozenset(allowed))

    def contains(self, v: Any) -> bool:
        return isinstance(v, frozenset) and self.must <= v <= self.may

    def first_unknown(self) -> Any:
        return sorted_values(self.unknown)[0]

    def __str__(self) -> str:
        inside = ','.join(str(v) for v in sorted_values(self.must))
        maybe = ','.join(str(v) for v in sorted_values(self.unknown))
        return f"{{{inside}}}+?{{{maybe}}}"
