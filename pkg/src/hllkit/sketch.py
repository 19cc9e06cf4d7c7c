"""Register-based distinct-count sketch with byte-wide registers.

A sketch keeps m = 2**p single-byte registers.  For each inserted 64-bit
hash, the top p bits select a register and the following q bits are scanned
most-significant-first for the position of the first one bit (q+1 when those
bits are all zero).  The register keeps the maximum position seen, so a
sketch is fully determined by the *set* of hashes inserted, never by their
order or multiplicity.  All estimators in this package consume only the
histogram of register values, which therefore acts as the sufficient
statistic of the sketch.

Valid parameters: 2 <= p <= 26, q >= 0, p + q <= 64.  Register values live
in 0..q+1 and fit one byte.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigMismatchError, FormatError, RangeError

MAGIC = b"HLLS"
VERSION = 1

P_MIN, P_MAX = 2, 26
HASH_BITS = 64


@dataclass(frozen=True)
class SketchConfig:
    """Sketch shape: p index bits (m = 2**p registers) and q scanned value bits."""

    p: int
    q: int

    def __post_init__(self):
        if not P_MIN <= self.p <= P_MAX:
            raise RangeError(f"p={self.p} outside [{P_MIN}, {P_MAX}]")
        if self.q < 0:
            raise RangeError(f"q={self.q} must be >= 0")
        if self.p + self.q > HASH_BITS:
            raise RangeError(f"p+q={self.p + self.q} exceeds {HASH_BITS} hash bits")

    @property
    def m(self) -> int:
        return 1 << self.p

    @property
    def max_register(self) -> int:
        return self.q + 1


class RegisterHistogram:
    """Counts of register values: counts[k] registers hold value k, k in 0..q+1."""

    __slots__ = ("counts",)

    def __init__(self, counts):
        self.counts = np.asarray(counts, dtype=np.int64)
        if self.counts.ndim != 1 or self.counts.size < 2:
            raise RangeError("histogram needs one count per register value 0..q+1")
        if np.any(self.counts < 0):
            raise RangeError("histogram counts must be non-negative")

    @property
    def c0(self) -> int:
        """Number of registers still at zero."""
        return int(self.counts[0])

    @property
    def saturated(self) -> int:
        """Number of registers at the maximum value q+1."""
        return int(self.counts[-1])

    def total(self) -> int:
        return int(self.counts.sum())

    def check(self, config: SketchConfig) -> "RegisterHistogram":
        """Validate this histogram against a configuration (shape and mass)."""
        if self.counts.size != config.q + 2:
            raise RangeError(
                f"histogram has {self.counts.size} bins, config wants {config.q + 2}"
            )
        if self.total() != config.m:
            raise RangeError(f"histogram mass {self.total()} != m={config.m}")
        return self

    def __eq__(self, other):
        if not isinstance(other, RegisterHistogram):
            return NotImplemented
        return np.array_equal(self.counts, other.counts)

    def __repr__(self):
        return f"RegisterHistogram({self.counts.tolist()})"


class Sketch:
    """Mutable register array addressed by hash prefix.

    ``insert`` updates in place; ``merge`` is pure and returns a fresh sketch.
    """

    __slots__ = ("config", "_regs")

    def __init__(self, config: SketchConfig):
        self.config = config
        self._regs = np.zeros(config.m, dtype=np.uint8)

    @classmethod
    def from_registers(cls, config: SketchConfig, values) -> "Sketch":
        """Build a sketch from explicit register values (validated)."""
        arr = np.asarray(values)
        if arr.shape != (config.m,):
            raise RangeError(f"expected {config.m} register values, got {arr.shape}")
        if arr.size and (np.any(arr < 0) or np.any(arr > config.max_register)):
            raise RangeError(f"register values must lie in 0..{config.max_register}")
        sk = cls(config)
        sk._regs[:] = arr
        return sk

    @property
    def registers(self) -> np.ndarray:
        """Underlying register array (treat as read-only)."""
        return self._regs

    def insert(self, hash_value: int) -> None:
        """Insert one 64-bit hash value."""
        if not 0 <= hash_value < (1 << HASH_BITS):
            raise RangeError(f"hash value {hash_value} outside 64-bit range")
        p, q = self.config.p, self.config.q
        idx = hash_value >> (HASH_BITS - p)
        if q:
            bits = (hash_value >> (HASH_BITS - p - q)) & ((1 << q) - 1)
            value = q - bits.bit_length() + 1 if bits else q + 1
        else:
            value = 1
        if value > self._regs[idx]:
            self._regs[idx] = value

    def insert_many(self, hashes) -> None:
        """Vectorized insertion of an array of 64-bit hash values."""
        h = np.asarray(hashes, dtype=np.uint64)
        if h.size == 0:
            return
        p, q = self.config.p, self.config.q
        idx = (h >> np.uint64(HASH_BITS - p)).astype(np.int64)
        if q:
            mask = (np.uint64(1) << np.uint64(q)) - np.uint64(1)
            bits = (h >> np.uint64(HASH_BITS - p - q)) & mask
            value = (q + 1 - _bit_length_u64(bits)).astype(np.uint8)
        else:
            value = np.ones(h.size, dtype=np.uint8)
        np.maximum.at(self._regs, idx, value)

    def histogram(self) -> RegisterHistogram:
        counts = np.bincount(self._regs, minlength=self.config.q + 2)
        return RegisterHistogram(counts)

    def merge(self, other: "Sketch") -> "Sketch":
        """Pure register-wise maximum; inputs are left untouched."""
        if self.config != other.config:
            raise ConfigMismatchError(
                f"cannot merge {self.config} with {other.config}"
            )
        out = Sketch(self.config)
        np.maximum(self._regs, other._regs, out=out._regs)
        return out

    def to_bytes(self) -> bytes:
        """Serialize: magic, version byte, p byte, q byte, m register bytes."""
        head = MAGIC + bytes([VERSION, self.config.p, self.config.q])
        return head + self._regs.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "Sketch":
        """Parse ``to_bytes`` output, validating structure and register range."""
        if len(data) < 7:
            raise FormatError(f"serialized sketch truncated ({len(data)} bytes)")
        if data[:4] != MAGIC:
            raise FormatError(f"bad magic {data[:4]!r}")
        if data[4] != VERSION:
            raise FormatError(f"unsupported version {data[4]}")
        p, q = data[5], data[6]
        if not P_MIN <= p <= P_MAX or p + q > HASH_BITS:
            raise RangeError(f"serialized parameters p={p}, q={q} out of range")
        config = SketchConfig(p, q)
        body = data[7:]
        if len(body) != config.m:
            raise FormatError(
                f"expected {config.m} register bytes, got {len(body)}"
            )
        regs = np.frombuffer(body, dtype=np.uint8)
        if np.any(regs > config.max_register):
            raise RangeError("register value exceeds q+1")
        return cls.from_registers(config, regs)

    def __eq__(self, other):
        if not isinstance(other, Sketch):
            return NotImplemented
        return self.config == other.config and np.array_equal(self._regs, other._regs)

    def __repr__(self):
        filled = int(np.count_nonzero(self._regs))
        return f"Sketch(p={self.config.p}, q={self.config.q}, nonzero={filled})"


def merge(a: Sketch, b: Sketch) -> Sketch:
    """Module-level alias for :meth:`Sketch.merge`."""
    return a.merge(b)


def _bit_length_u64(v: np.ndarray) -> np.ndarray:
    """Bit length of each uint64 (0 for 0), without float round-off."""
    out = np.zeros(v.shape, dtype=np.int64)
    v = v.copy()
    for shift in (32, 16, 8, 4, 2, 1):
        big = v >= (np.uint64(1) << np.uint64(shift))
        out[big] += shift
        v[big] >>= np.uint64(shift)
    out[v > 0] += 1
    return out
