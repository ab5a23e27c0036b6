"""Order-k context entropy codec: adaptive Laplace counts driving a 32-bit arithmetic coder.

Stream layout (bit-exact):

    b"MLZC" | version (1 byte) | n (unsigned LEB128) | k (1 byte) | |A|-1 (1 byte)
    | coder id (1 byte) | payload

The alphabet byte holds |A|-1, not |A|, so alphabets of 1..256 symbols fit; readers add one.
The payload is the arithmetic-coded symbol stream, MSB first, zero padded to a byte.
The first k symbols are coded with an order-0 model of their own; every later symbol is
coded under the count vector of its k-symbol context.
"""

import logging
import math
from dataclasses import dataclass
from itertools import accumulate
from pathlib import Path
from typing import Dict, List

from .count_model import Alphabet, Sequence, empirical_conditional_entropy
from .exceptions import BudgetExceededError, DecodeError, DomainError
from .lz78 import CodelengthReport

logger = logging.getLogger(__name__)

MAGIC = b"MLZC"
FORMAT_VERSION = 1
CODER_LAPLACE_ARITHMETIC = 1
STATE_BITS = 32
TWO_PART_CONSTANT = 64
# the decoder primes STATE_BITS bits; reading much further past the end means truncation
MAX_PAST_END_BITS = 2 * STATE_BITS


@dataclass(frozen=True)
class BitstreamHeader:
    """Fixed stream prefix; alphabet_size is the true |A|, serialized as |A|-1"""

    n: int
    k: int
    alphabet_size: int
    version: int = FORMAT_VERSION
    coder_id: int = CODER_LAPLACE_ARITHMETIC

    def to_bytes(self) -> bytes:
        return (
            MAGIC
            + bytes([self.version])
            + encode_varint(self.n)
            + bytes([self.k, self.alphabet_size - 1, self.coder_id])
        )


@dataclass(frozen=True)
class Bitstream:
    header: BitstreamHeader
    payload: bytes
    payload_bits: int

    @property
    def header_bits(self) -> int:
        return 8 * len(self.header.to_bytes())

    def to_bytes(self) -> bytes:
        return self.header.to_bytes() + self.payload

    @classmethod
    def from_bytes(cls, data: bytes) -> "Bitstream":
        header, offset = parse_header(data)
        payload = bytes(data[offset:])
        return cls(header, payload, 8 * len(payload))

    def write(self, path: Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def read(cls, path: Path) -> "Bitstream":
        return cls.from_bytes(Path(path).read_bytes())


def encode_varint(value: int) -> bytes:
    if value < 0:
        raise DomainError(f"varint must be non-negative, got {value}")
    out = bytearray()
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def decode_varint(data: bytes, offset: int) -> tuple[int, int]:
    """Value and the offset just past it"""
    value = 0
    shift = 0
    position = offset
    while True:
        if position >= len(data):
            raise DecodeError("truncated length field", position)
        byte = data[position]
        value |= (byte & 0x7F) << shift
        position += 1
        if not byte & 0x80:
            return value, position
        shift += 7
        if shift > 63:
            raise DecodeError("length field too long", position)


def parse_header(data: bytes) -> tuple[BitstreamHeader, int]:
    if data[: len(MAGIC)] != MAGIC:
        raise DecodeError("bad magic", 0)
    position = len(MAGIC)
    if position >= len(data):
        raise DecodeError("missing version", position)
    version = data[position]
    if version != FORMAT_VERSION:
        raise DecodeError(f"unsupported version {version}", position)
    n, position = decode_varint(data, position + 1)
    if n < 1:
        raise DecodeError("sequence length must be positive", position - 1)
    if position + 3 > len(data):
        raise DecodeError("truncated header", len(data))
    k, alphabet_minus_one, coder_id = data[position : position + 3]
    if coder_id != CODER_LAPLACE_ARITHMETIC:
        raise DecodeError(f"unknown coder id {coder_id}", position + 2)
    header = BitstreamHeader(
        n=n, k=k, alphabet_size=alphabet_minus_one + 1, version=version, coder_id=coder_id
    )
    return header, position + 3


class BitWriter:
    def __init__(self) -> None:
        self.buffer = bytearray()
        self.current = 0
        self.filled = 0
        self.bits_written = 0

    def write(self, bit: int) -> None:
        self.current = (self.current << 1) | bit
        self.filled += 1
        self.bits_written += 1
        if self.filled == 8:
            self.buffer.append(self.current)
            self.current = 0
            self.filled = 0

    def getvalue(self) -> bytes:
        if not self.filled:
            return bytes(self.buffer)
        return bytes(self.buffer) + bytes([self.current << (8 - self.filled)])


class BitReader:
    """MSB-first reader that yields zeros past the end and counts them"""

    def __init__(self, data: bytes):
        self.data = data
        self.position = 0  # in bits
        self.past_end = 0

    def read(self) -> int:
        byte_index = self.position >> 3
        if byte_index >= len(self.data):
            self.past_end += 1
            return 0
        bit = (self.data[byte_index] >> (7 - (self.position & 7))) & 1
        self.position += 1
        return bit


class _ArithmeticCoder:
    """Interval state shared by the encoder and decoder"""

    full_range = 1 << STATE_BITS
    half_range = full_range >> 1
    quarter_range = half_range >> 1
    maximum_total = quarter_range + 2
    state_mask = full_range - 1

    def __init__(self) -> None:
        self.low = 0
        self.high = self.state_mask

    def update(self, cumulative: List[int], symbol: int) -> None:
        total = cumulative[-1]
        if total > self.maximum_total:
            raise BudgetExceededError(f"frequency total {total} exceeds {self.maximum_total}")
        span = self.high - self.low + 1
        self.high = self.low + cumulative[symbol + 1] * span // total - 1
        self.low = self.low + cumulative[symbol] * span // total
        while ((self.low ^ self.high) & self.half_range) == 0:
            self.shift()
            self.low = (self.low << 1) & self.state_mask
            self.high = ((self.high << 1) & self.state_mask) | 1
        while self.low & ~self.high & self.quarter_range:
            self.underflow()
            self.low = (self.low << 1) & (self.state_mask >> 1)
            self.high = ((self.high << 1) & (self.state_mask >> 1)) | self.half_range | 1

    def shift(self) -> None:
        raise NotImplementedError

    def underflow(self) -> None:
        raise NotImplementedError


class ArithmeticEncoder(_ArithmeticCoder):
    def __init__(self, output: BitWriter):
        super().__init__()
        self.output = output
        self.pending = 0

    def write(self, cumulative: List[int], symbol: int) -> None:
        self.update(cumulative, symbol)

    def finish(self) -> None:
        # a single 1 lands inside the final interval once the decoder pads with zeros
        self.output.write(1)

    def shift(self) -> None:
        bit = self.low >> (STATE_BITS - 1)
        self.output.write(bit)
        for _ in range(self.pending):
            self.output.write(bit ^ 1)
        self.pending = 0

    def underflow(self) -> None:
        self.pending += 1


class ArithmeticDecoder(_ArithmeticCoder):
    def __init__(self, source: BitReader):
        super().__init__()
        self.input = source
        self.code = 0
        for _ in range(STATE_BITS):
            self.code = (self.code << 1) | self.input.read()

    def read(self, cumulative: List[int]) -> int:
        total = cumulative[-1]
        span = self.high - self.low + 1
        value = ((self.code - self.low + 1) * total - 1) // span
        start, end = 0, len(cumulative) - 1
        while end - start > 1:
            middle = (start + end) >> 1
            if cumulative[middle] > value:
                end = middle
            else:
                start = middle
        self.update(cumulative, start)
        return start

    def shift(self) -> None:
        self.code = ((self.code << 1) & self.state_mask) | self.input.read()

    def underflow(self) -> None:
        self.code = (
            (self.code & self.half_range)
            | ((self.code << 1) & (self.state_mask >> 1))
            | self.input.read()
        )


class AdaptiveContextModel:
    """Laplace (add-one) counts per order-k context, plus an order-0 model for the first k"""

    def __init__(self, alphabet_size: int, k: int):
        self.alphabet_size = alphabet_size
        self.k = k
        self.modulus = alphabet_size**k
        self.context = 0
        self.position = 0
        self.head = [1] * alphabet_size
        self.tables: Dict[int, List[int]] = {}

    def _counts(self) -> List[int]:
        if self.position < self.k:
            return self.head
        counts = self.tables.get(self.context)
        if counts is None:
            counts = [1] * self.alphabet_size
            self.tables[self.context] = counts
        return counts

    def cumulative(self) -> List[int]:
        return [0, *accumulate(self._counts())]

    def update(self, symbol: int) -> None:
        self._counts()[symbol] += 1
        self.context = (self.context * self.alphabet_size + symbol) % self.modulus
        self.position += 1


def entropy_encode(y: Sequence, k: int) -> Bitstream:
    """Header plus arithmetic-coded payload; entropy_decode inverts it exactly"""
    a = y.alphabet.size
    if not 0 <= k <= 255:
        raise DomainError(f"context order must lie in 0..255, got {k}")
    if a > 256:
        raise DomainError(f"alphabet size {a} does not fit the header")
    if y.n + a > _ArithmeticCoder.maximum_total:
        raise BudgetExceededError(f"sequence of length {y.n} overflows the coder's counts")

    writer = BitWriter()
    encoder = ArithmeticEncoder(writer)
    model = AdaptiveContextModel(a, k)
    for symbol in y.symbols.tolist():
        encoder.write(model.cumulative(), symbol)
        model.update(symbol)
    encoder.finish()

    header = BitstreamHeader(n=y.n, k=k, alphabet_size=a)
    logger.debug(f"encoded n={y.n} k={k}: {writer.bits_written} payload bits")
    return Bitstream(header, writer.getvalue(), writer.bits_written)


def entropy_decode(stream: Bitstream | bytes) -> Sequence:
    """Exact inverse of entropy_encode"""
    if not isinstance(stream, Bitstream):
        stream = Bitstream.from_bytes(stream)
    header = stream.header
    header_length = len(header.to_bytes())
    if not stream.payload:
        raise DecodeError("empty payload", header_length)

    reader = BitReader(stream.payload)
    decoder = ArithmeticDecoder(reader)
    model = AdaptiveContextModel(header.alphabet_size, header.k)
    symbols: List[int] = []
    for _ in range(header.n):
        symbol = decoder.read(model.cumulative())
        model.update(symbol)
        symbols.append(symbol)
        if reader.past_end > MAX_PAST_END_BITS:
            raise DecodeError("payload truncated", header_length + len(stream.payload))
    return Sequence(symbols, Alphabet(header.alphabet_size))


def codelength_report(stream: Bitstream, y: Sequence) -> CodelengthReport:
    """Payload bits of a real stream against H_k of the sequence it carries"""
    return CodelengthReport(
        n=y.n,
        k=stream.header.k,
        bits_total=stream.payload_bits,
        entropy=empirical_conditional_entropy(y, stream.header.k),
        header_bits=stream.header_bits,
    )


def two_part_bound(n: int, k: int, alphabet_size: int, entropy: float) -> float:
    """n H_k + |A|^(k+1) log2(n+1) + C: describe the counts, then code given them"""
    return n * entropy + alphabet_size ** (k + 1) * math.log2(n + 1) + TWO_PART_CONSTANT
