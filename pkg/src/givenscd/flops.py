"""FLOP accounting.

One unit per scalar addition or multiplication. Comparisons, absolute
values, index arithmetic and transcendental calls (cos, sin) are free.
"""


class FlopCounter:
    __slots__ = ("_count",)

    def __init__(self, count: int = 0):
        if count < 0:
            raise ValueError("flop count must be non-negative")
        self._count = int(count)

    @property
    def count(self) -> int:
        return self._count

    def add(self, n) -> None:
        n = int(n)
        if n < 0:
            raise ValueError("flop increments must be non-negative")
        self._count += n

    def __repr__(self):
        return f"FlopCounter({self._count})"


class NullCounter(FlopCounter):
    """Counter that discards increments; used for diagnostics that should not
    appear in the solver cost."""

    __slots__ = ()

    def add(self, n) -> None:
        pass
