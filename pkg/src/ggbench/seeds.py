"""Deterministic seeding and RNG primitives shared by the harness and the kernels.

The simulation RNG is a 32-bit xorshift driven from mixed seeds.  Everything
here is written so the arithmetic is identical whether it runs as plain
Python integers or as numba int64 (no intermediate may reach 2**63, and right
shifts only ever see non-negative values).
"""

MASK32 = 0xFFFFFFFF
MASK64 = 0xFFFFFFFFFFFFFFFF
SEED_SPACE = 1 << 62  # seeds passed into kernels must stay int64-safe with headroom


def mix32(h):
    """Avalanche a 32-bit value (Mueller/degski multiplicative mix)."""
    h = (h ^ (h >> 16)) & MASK32
    h = (h * 0x45D9F3B) & MASK32
    h = (h ^ (h >> 16)) & MASK32
    h = (h * 0x45D9F3B) & MASK32
    h = (h ^ (h >> 16)) & MASK32
    return h


def seed32(seed):
    """Fold a non-negative seed (< 2**62) into a nonzero 32-bit RNG state."""
    lo = seed & MASK32
    hi = (seed >> 32) & MASK32
    h = mix32((lo ^ ((hi * 0x9E3779B1) & MASK32)) & MASK32)
    if h == 0:
        h = 0x6A09E667
    return h


def xs32(x):
    """One xorshift32 step; state must be nonzero and < 2**32."""
    x ^= (x << 13) & MASK32
    x ^= x >> 17
    x ^= (x << 5) & MASK32
    return x


class Rng:
    """Tiny deterministic generator for harness-side (non-kernel) draws."""

    def __init__(self, seed):
        self._x = seed32(normalize_seed(seed))

    def randint(self, n):
        """Uniform integer in [0, n)."""
        if n <= 1:
            return 0
        self._x = xs32(self._x)
        return self._x % n

    def random(self):
        """Uniform float in [0, 1)."""
        self._x = xs32(self._x)
        return self._x / 4294967296.0


def normalize_seed(seed):
    """Clamp an arbitrary int into the accepted 62-bit seed space."""
    return seed % SEED_SPACE


def derive_seed(master, *parts):
    """Derive an independent child seed from a master seed and index parts.

    Uses splitmix64-style mixing over the part sequence; the result is inside
    SEED_SPACE.  Distinct part tuples give decorrelated streams, which is what
    keeps e.g. evaluation-phase episode seeds independent of how many learning
    episodes preceded them.
    """
    h = (normalize_seed(master) * 0x9E3779B97F4A7C15 + 0x243F6A8885A308D3) & MASK64
    for p in parts:
        h = (h ^ ((p & MASK64) * 0xBF58476D1CE4E5B9)) & MASK64
        h = (h + 0x9E3779B97F4A7C15) & MASK64
        z = h
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        h = (z ^ (z >> 31)) & MASK64
    return h % SEED_SPACE
