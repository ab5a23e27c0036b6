import numpy as np
import numpy.typing as npt

from .count_model import Sequence
from .exceptions import ContractViolation, DomainError

FloatArray = npt.NDArray[np.float64]


def hamming(source_size: int, reconstruction_size: int | None = None) -> FloatArray:
    """d[x, y] = 0 if x == y else 1"""
    reconstruction_size = source_size if reconstruction_size is None else reconstruction_size
    d = np.ones((source_size, reconstruction_size), dtype=np.float64)
    np.fill_diagonal(d, 0.0)
    return d


def validate(d: npt.ArrayLike, source_size: int, reconstruction_size: int) -> FloatArray:
    """Check shape and sign of a single-letter distortion matrix"""
    matrix = np.asarray(d, dtype=np.float64)
    if matrix.shape != (source_size, reconstruction_size):
        raise ContractViolation(
            f"distortion matrix shape {matrix.shape} != ({source_size}, {reconstruction_size})"
        )
    if np.any(matrix < 0) or not np.all(np.isfinite(matrix)):
        raise DomainError("distortion values must be finite and non-negative")
    return matrix


def per_symbol(x: Sequence, y: Sequence, d: npt.ArrayLike) -> float:
    """d_n(x^n, y^n) = (1/n) sum_i d(x_i, y_i)"""
    if x.n != y.n:
        raise ContractViolation(f"length mismatch: {x.n} != {y.n}")
    matrix = validate(d, x.alphabet.size, y.alphabet.size)
    return float(matrix[x.symbols, y.symbols].mean())


def block(d: npt.ArrayLike, length: int) -> FloatArray:
    """d_k1 between all pairs of blocks: mean of per-coordinate d; indices most-recent-last"""
    matrix = np.asarray(d, dtype=np.float64)
    src, rec = matrix.shape
    total = np.zeros((src**length, rec**length), dtype=np.float64)
    x_blocks = np.arange(src**length)
    y_blocks = np.arange(rec**length)
    for j in range(length):
        xs = (x_blocks // src**j) % src
        ys = (y_blocks // rec**j) % rec
        total += matrix[np.ix_(xs, ys)]
    return total / length
