from typing import List


class FenwickTree:
    """Cumulative frequency table over integer indices ``1..max_index``.

    Binary indexed tree with integer frequencies, so totals are exact. ``find``
    returns the smallest index whose cumulative sum is ``>= v``, which is the
    inverse-CDF lookup used to pick the species hosting a gene coalescence.
    """

    def __init__(self, max_index: int) -> None:
        if max_index <= 0:
            raise ValueError(f"max_index must be positive, got {max_index}")
        self._max_index = max_index
        self._tree: List[int] = [0] * (max_index + 1)
        self._value: List[int] = [0] * (max_index + 1)
        self._total = 0
        u = max_index
        while u != 0:
            self._log_max_index = u
            u -= u & -u

    @property
    def total(self) -> int:
        return self._total

    def increment(self, index: int, v: int) -> None:
        if not 0 < index <= self._max_index:
            raise IndexError(f"Index {index} outside 1..{self._max_index}")
        self._value[index] += v
        self._total += v
        j = index
        while j <= self._max_index:
            self._tree[j] += v
            j += j & -j

    def set_value(self, index: int, v: int) -> None:
        self.increment(index, v - self._value[index])

    def get_value(self, index: int) -> int:
        return self._value[index]

    def get_cumulative_sum(self, index: int) -> int:
        j = index
        s = 0
        while j > 0:
            s += self._tree[j]
            j -= j & -j
        return s

    def find(self, v: int) -> int:
        """Return the smallest index with cumulative sum ``>= v`` (``v >= 1``)."""
        j = 0
        s = v
        half = self._log_max_index
        while half > 0:
            # Skip non-existent entries
            while j + half > self._max_index:
                half >>= 1
            k = j + half
            if s > self._tree[k]:
                j = k
                s -= self._tree[j]
            half >>= 1
        return j + 1
