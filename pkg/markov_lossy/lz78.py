"""LZ78 incremental parsing as a codelength oracle, and the Ziv-gap scan built on it"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, computed_field

from .count_model import Alphabet, Sequence, empirical_conditional_entropy
from .exceptions import DomainError
from .sources import MarkovSource, generate

logger = logging.getLogger(__name__)

ZIV_FAMILIES = ("constant", "iid", "markov", "periodic")


class CodelengthReport(BaseModel):
    """Bits spent on a sequence against its own order-k empirical entropy"""

    n: int
    k: int
    bits_total: int = Field(ge=0)
    entropy: float = Field(description="H_k of the coded sequence, bits per symbol")
    header_bits: int = 0
    idealized: bool = Field(default=False, description="True for non-decodable accounting")

    @computed_field  # type: ignore[prop-decorator]
    @property
    def bits_per_symbol(self) -> float:
        return self.bits_total / self.n

    @computed_field  # type: ignore[prop-decorator]
    @property
    def excess(self) -> float:
        return self.bits_per_symbol - self.entropy


@dataclass(frozen=True)
class Phrase:
    """A parsed phrase: an earlier phrase (0 = empty) extended by one symbol"""

    pointer: int
    symbol: int | None  # None only for a final partial phrase


def lz78_parse(symbols: Iterable[int]) -> List[Phrase]:
    trie: Dict[Tuple[int, int], int] = {}
    phrases: List[Phrase] = []
    node = 0
    for symbol in symbols:
        key = (node, int(symbol))
        child = trie.get(key)
        if child is not None:
            node = child
            continue
        phrases.append(Phrase(node, int(symbol)))
        trie[key] = len(phrases)
        node = 0
    if node:
        phrases.append(Phrase(node, None))
    return phrases


def expand_phrases(phrases: List[Phrase]) -> List[int]:
    """Concatenation of the phrases, the inverse of lz78_parse"""
    expansions: List[List[int]] = [[]]
    out: List[int] = []
    for phrase in phrases:
        text = expansions[phrase.pointer] + ([] if phrase.symbol is None else [phrase.symbol])
        expansions.append(text)
        out.extend(text)
    return out


def phrase_bits(phrases: List[Phrase], alphabet: Alphabet) -> int:
    """
    Pointer ceil(log2 j) plus innovation ceil(log2 |A|) for phrase j

    A final partial phrase costs its pointer only.
    """
    innovation = math.ceil(math.log2(alphabet.size)) if alphabet.size > 1 else 0
    total = 0
    for j, phrase in enumerate(phrases, start=1):
        total += math.ceil(math.log2(j))
        if phrase.symbol is not None:
            total += innovation
    return total


def lz78_codelength(y: Sequence, k: int = 0) -> CodelengthReport:
    """l_LZ(y^n), compared with H_k(y^n)"""
    phrases = lz78_parse(y.symbols.tolist())
    return CodelengthReport(
        n=y.n,
        k=k,
        bits_total=phrase_bits(phrases, y.alphabet),
        entropy=empirical_conditional_entropy(y, k),
        idealized=True,
    )


def slow_order(n: int) -> int:
    """k(n) = floor(log2 log2 n), an o(log n) context order"""
    if n < 4:
        return 0
    return max(int(math.floor(math.log2(math.log2(n)))), 0)


def sample_family(
    family: str,
    n: int,
    k: int,
    rng: np.random.Generator,
    alphabet_size: int = 2,
    q: float = 0.2,
) -> Sequence:
    """One member of a named sequence family"""
    alphabet = Alphabet(alphabet_size)
    if family == "constant":
        return Sequence(np.full(n, rng.integers(alphabet_size)), alphabet)
    if family == "iid":
        return Sequence(rng.integers(alphabet_size, size=n), alphabet)
    if family == "markov":
        if alphabet_size != 2:
            raise DomainError("the markov family is binary")
        source = MarkovSource.binary_symmetric(q)
        return generate(source, n, seed=int(rng.integers(2**31)))
    if family == "periodic":
        # period one longer than the number of (k+1)-blocks
        period = rng.integers(alphabet_size, size=alphabet_size ** (k + 1) + 1)
        return Sequence(np.resize(period, n), alphabet)
    raise DomainError(f"unknown sequence family {family!r}; expected one of {ZIV_FAMILIES}")


def ziv_gap_scan(
    k_of_n: Callable[[int], int],
    ns: List[int],
    families: Iterable[str] = ZIV_FAMILIES,
    samples: int = 3,
    seed: int = 0,
    alphabet_size: int = 2,
) -> pd.DataFrame:
    """
    Worst observed l_LZ/n - H_k(n) per (n, family)

    Returns:
        DataFrame with columns n, k, family, samples, max_excess, mean_bits_per_symbol
        and max_excess_over_families, the worst family at the same n
    """
    rng = np.random.default_rng(seed)
    rows = []
    for n in ns:
        k = k_of_n(n)
        for family in families:
            reports = [
                lz78_codelength(sample_family(family, n, k, rng, alphabet_size), k)
                for _ in range(samples)
            ]
            worst = max(r.excess for r in reports)
            mean_rate = float(np.mean([r.bits_per_symbol for r in reports]))
            rows.append(
                {
                    "n": n,
                    "k": k,
                    "family": family,
                    "samples": samples,
                    "max_excess": worst,
                    "mean_bits_per_symbol": mean_rate,
                }
            )
            logger.debug(f"ziv scan n={n} k={k} {family}: max excess {worst:.4f}")
    frame = pd.DataFrame(rows)
    frame["max_excess_over_families"] = frame.groupby("n")["max_excess"].transform("max")
    return frame


def worst_excess_by_n(frame: pd.DataFrame) -> pd.Series:
    """max over families of max_excess, indexed by n in scan order"""
    return frame.groupby("n", sort=False)["max_excess"].max()
