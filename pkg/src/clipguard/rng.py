"""Portable seeded randomness: SplitMix64 streams and FNV-1a hashing."""

MASK64 = (1 << 64) - 1

_GOLDEN = 0x9E3779B97F4A7C15
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


class RngStream:
    """SplitMix64 generator.

    Identical seeds give identical draw sequences everywhere, since the
    recurrence uses only 64-bit integer arithmetic.
    """

    __slots__ = ("state",)

    def __init__(self, seed):
        self.state = int(seed) & MASK64

    def next_u64(self):
        self.state = (self.state + _GOLDEN) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def uniform(self):
        """Float in [0, 1) with 53 bits of resolution."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def randint(self, lo, hi):
        """Integer uniformly drawn from the closed range [lo, hi]."""
        if hi < lo:
            raise ValueError(f"empty range [{lo}, {hi}]")
        span = hi - lo + 1
        # rejection sampling keeps the draw exactly uniform
        limit = (1 << 64) - ((1 << 64) % span)
        while True:
            x = self.next_u64()
            if x < limit:
                return lo + x % span

    def shuffle(self, items):
        """In-place Fisher-Yates shuffle of a list."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(0, i)
            items[i], items[j] = items[j], items[i]
        return items

    def copy(self):
        out = RngStream(0)
        out.state = self.state
        return out

    def __repr__(self):
        return f"RngStream(state={self.state:#018x})"


def fnv1a_64(data):
    if isinstance(data, str):
        data = data.encode("utf-8")
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & MASK64
    return h


def clip_stream(global_seed, clip_path):
    """Per-clip stream seeded with ``global_seed XOR fnv1a(clip_path)``.

    Augmentation for a clip then depends only on the seed and its path,
    never on where the clip falls in a dataset pass.
    """
    return RngStream((int(global_seed) & MASK64) ^ fnv1a_64(str(clip_path)))


def derive_seed(*parts):
    """Mix integers into one 64-bit seed via repeated SplitMix64 steps."""
    state = 0
    for p in parts:
        rs = RngStream(state ^ (int(p) & MASK64))
        state = rs.next_u64()
    return state
