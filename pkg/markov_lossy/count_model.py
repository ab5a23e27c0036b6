"""Sequence statistics: count matrices and empirical conditional entropy.

Contexts b = (y_{i-k}, ..., y_{i-1}) are encoded as integers with the most recent
symbol as the least-significant base-|A| digit. A (k+1)-block is encoded the same
way, so the block index of (b, beta) is ``b * |A| + beta`` and appending a symbol is
a shift-and-mask.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
import numpy.typing as npt
import pandas as pd
from scipy.stats import entropy as scipy_entropy

from .exceptions import ContractViolation, DomainError
from .io import read_csv_with_header, write_csv_with_header

logger = logging.getLogger(__name__)

IntArray = npt.NDArray[np.int64]
FloatArray = npt.NDArray[np.float64]

NORMALIZATION_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Alphabet:
    """Symbols are the integers 0..size-1"""

    size: int

    def __post_init__(self) -> None:
        if self.size < 1:
            raise DomainError(f"alphabet size must be positive, got {self.size}")

    def contexts(self, k: int) -> int:
        """Number of order-k contexts, |A|^k"""
        return int(self.size**k)


@dataclass(frozen=True, eq=False)
class Sequence:
    """Immutable symbol sequence over an alphabet"""

    symbols: IntArray
    alphabet: Alphabet

    def __post_init__(self) -> None:
        symbols = np.array(self.symbols, dtype=np.int64).reshape(-1)
        if symbols.size == 0:
            raise DomainError("sequence must contain at least one symbol")
        if symbols.min() < 0 or symbols.max() >= self.alphabet.size:
            raise DomainError(
                f"symbols must lie in 0..{self.alphabet.size - 1}, "
                f"got range {symbols.min()}..{symbols.max()}"
            )
        symbols.setflags(write=False)
        object.__setattr__(self, "symbols", symbols)

    @classmethod
    def of(cls, values: Iterable[int] | str, alphabet_size: int | None = None) -> "Sequence":
        """Build from ints or a digit string; alphabet defaults to max + 1, at least 2"""
        if isinstance(values, str):
            symbols = np.array([int(c) for c in values], dtype=np.int64)
        else:
            symbols = np.fromiter((int(v) for v in values), dtype=np.int64)
        if alphabet_size is None:
            alphabet_size = max(2, int(symbols.max()) + 1) if symbols.size else 2
        return cls(symbols, Alphabet(alphabet_size))

    @property
    def n(self) -> int:
        return int(self.symbols.size)

    def __len__(self) -> int:
        return self.n

    def with_symbols(self, symbols: npt.ArrayLike) -> "Sequence":
        return Sequence(np.asarray(symbols, dtype=np.int64), self.alphabet)


def context_indices(symbols: npt.ArrayLike, k: int, alphabet_size: int) -> IntArray:
    """Cyclic order-k context of every position: sum_j y_{i-j} * |A|^(j-1)"""
    y = np.asarray(symbols, dtype=np.int64)
    ctx = np.zeros(y.shape, dtype=np.int64)
    weight = 1
    for j in range(1, k + 1):
        ctx += np.roll(y, j, axis=-1) * weight
        weight *= alphabet_size
    return ctx


def block_indices(symbols: npt.ArrayLike, k: int, alphabet_size: int) -> IntArray:
    """Cyclic (k+1)-block ending at every position, context * |A| + symbol"""
    y = np.asarray(symbols, dtype=np.int64)
    return context_indices(y, k, alphabet_size) * alphabet_size + y


@dataclass(frozen=True, eq=False)
class CountMatrix:
    """(k+1)th order count matrix m[beta, b]; rows are symbols, columns contexts"""

    values: FloatArray
    order: int
    alphabet: Alphabet
    normalized: bool = True

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        expected = (self.alphabet.size, self.alphabet.contexts(self.order))
        if values.shape != expected:
            raise ContractViolation(f"count matrix shape {values.shape} != {expected}")
        if np.any(values < 0):
            raise DomainError("count matrix entries must be non-negative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_blocks(
        cls, block_probabilities: npt.ArrayLike, order: int, alphabet: Alphabet
    ) -> "CountMatrix":
        """Reindex a distribution over (k+1)-blocks into matrix form"""
        p = np.asarray(block_probabilities, dtype=np.float64)
        return cls(p.reshape(alphabet.contexts(order), alphabet.size).T, order, alphabet)

    @property
    def total(self) -> float:
        return float(self.values.sum())

    def blocks(self) -> FloatArray:
        """Flat (k+1)-block vector indexed by context * |A| + symbol"""
        return np.ascontiguousarray(self.values.T).reshape(-1)

    def column_sums(self) -> FloatArray:
        return self.values.sum(axis=0)

    def normalize(self) -> "CountMatrix":
        total = self.total
        if total <= 0:
            raise ContractViolation("cannot normalize an empty count matrix")
        return CountMatrix(self.values / total, self.order, self.alphabet, normalized=True)

    def require_normalized(self) -> None:
        if not self.normalized or abs(self.total - 1.0) > NORMALIZATION_TOLERANCE:
            raise ContractViolation(f"count matrix must be normalized, sums to {self.total}")

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.values, columns=range(self.values.shape[1]))
        frame.index.name = "beta"
        return frame

    def to_csv(self, path: Path) -> None:
        write_csv_with_header(
            self.to_frame(),
            path,
            {"kind": "count_matrix", "order": self.order, "alphabet": self.alphabet.size},
            index=True,
        )

    @classmethod
    def read_csv(cls, path: Path) -> "CountMatrix":
        frame, meta = read_csv_with_header(path, index_col="beta")
        matrix = cls(
            frame.to_numpy(dtype=np.float64),
            int(meta["order"]),
            Alphabet(int(meta["alphabet"])),
        )
        if abs(matrix.total - 1.0) <= NORMALIZATION_TOLERANCE:
            return matrix
        return matrix.normalize()


def raw_counts(y: Sequence, k: int) -> IntArray:
    """Integer (k+1)th order counts, shape (|A|, |A|^k), cyclic convention"""
    if k < 0:
        raise DomainError(f"order must be non-negative, got {k}")
    a = y.alphabet.size
    blocks = block_indices(y.symbols, k, a)
    counts = np.bincount(blocks, minlength=a ** (k + 1))
    return counts.reshape(a**k, a).T.astype(np.int64)


def count_matrix(y: Sequence, k: int) -> CountMatrix:
    """Normalized (k+1)th order empirical count matrix of y"""
    counts = raw_counts(y, k)
    return CountMatrix(counts / y.n, k, y.alphabet)


def entropy_functional(v: npt.ArrayLike) -> float:
    """Entropy in bits of the pmf proportional to v; 0 for the zero vector"""
    vec = np.asarray(v, dtype=np.float64).reshape(-1)
    if np.any(vec < 0):
        raise DomainError("entropy functional is defined for non-negative vectors only")
    if not vec.any():
        return 0.0
    return float(scipy_entropy(vec, base=2))


def column_entropy_terms(values: npt.ArrayLike) -> FloatArray:
    """Per-column S_b * H(m[., b]) in bits; works on stacked matrices (..., |A|, C)"""
    m = np.asarray(values, dtype=np.float64)
    sums = m.sum(axis=-2, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(m > 0, m * np.log2(np.where(m > 0, sums / m, 1.0)), 0.0)
    return np.asarray(terms.sum(axis=-2))


def conditional_entropy(m: CountMatrix) -> float:
    """H_k(m) = sum_b H(m[., b]) * 1^T m[., b], in bits per symbol"""
    m.require_normalized()
    return float(max(column_entropy_terms(m.values).sum(), 0.0))


def empirical_conditional_entropy(y: Sequence, k: int) -> float:
    """H_k(y^n), the conditional entropy of y's own count matrix"""
    return conditional_entropy(count_matrix(y, k))


def batch_conditional_entropy(blocks: IntArray, k: int, alphabet_size: int) -> FloatArray:
    """H_k for each row of a (N, n) array of block indices"""
    rows, n = blocks.shape
    states = alphabet_size ** (k + 1)
    offsets = (np.arange(rows, dtype=np.int64) * states)[:, None]
    counts = np.bincount((blocks + offsets).reshape(-1), minlength=rows * states)
    per_row = counts.reshape(rows, alphabet_size**k, alphabet_size).transpose(0, 2, 1) / n
    return column_entropy_terms(per_row).sum(axis=-1)


def stationarity_defect(
    block_probabilities: npt.ArrayLike, length: int, alphabet_size: int
) -> float:
    """max_b |sum_beta p(beta b) - sum_beta p(b beta)| over blocks of the given length"""
    if length <= 1:
        return 0.0
    p = np.asarray(block_probabilities, dtype=np.float64)
    shorter = alphabet_size ** (length - 1)
    leading = p.reshape(shorter, alphabet_size).sum(axis=1)  # first length-1 symbols
    trailing = p.reshape(alphabet_size, shorter).sum(axis=0)  # last length-1 symbols
    return float(np.abs(leading - trailing).max())


def check_stationarity(m: CountMatrix, tol: float = 1e-12) -> bool:
    """True iff incoming and outgoing k-block marginals agree within tol"""
    m.require_normalized()
    return stationarity_defect(m.blocks(), m.order + 1, m.alphabet.size) <= tol


def marginalize(m: CountMatrix, order: int) -> CountMatrix:
    """Reduce a (k+1)-block matrix to a lower order by summing out the oldest symbols"""
    if order > m.order or order < 0:
        raise DomainError(f"cannot marginalize order {m.order} to {order}")
    a = m.alphabet.size
    p = m.blocks()
    kept = a ** (order + 1)
    reduced = p.reshape(-1, kept).sum(axis=0)
    return CountMatrix.from_blocks(reduced, order, m.alphabet)


@dataclass(frozen=True, eq=False)
class BlockDistribution:
    """Distribution over k1-blocks of an alphabet, indexed most-recent-symbol-last"""

    probabilities: FloatArray
    length: int
    alphabet: Alphabet

    def __post_init__(self) -> None:
        p = np.array(self.probabilities, dtype=np.float64)
        if p.shape != (self.alphabet.size**self.length,):
            raise ContractViolation(f"block distribution has shape {p.shape}")
        if np.any(p < 0) or abs(p.sum() - 1.0) > NORMALIZATION_TOLERANCE:
            raise ContractViolation("block distribution must be non-negative and sum to 1")
        p.setflags(write=False)
        object.__setattr__(self, "probabilities", p)

    def stationarity_defect(self) -> float:
        return stationarity_defect(self.probabilities, self.length, self.alphabet.size)

    def total_variation(self, other: "BlockDistribution") -> float:
        return float(0.5 * np.abs(self.probabilities - other.probabilities).sum())


def empirical_source_dist(x: Sequence, k1: int) -> BlockDistribution:
    """p^(k1)(a) = |{i : (x_{i-k1}, ..., x_{i-1}) = a}| / n with the cyclic convention"""
    if k1 < 1:
        raise DomainError(f"block length must be at least 1, got {k1}")
    a = x.alphabet.size
    windows = context_indices(x.symbols, k1, a)
    counts = np.bincount(windows, minlength=a**k1)
    return BlockDistribution(counts / x.n, k1, x.alphabet)
