"""Deterministic pseudo-random numbers: xoshiro256** seeded through splitmix64.

Everything stochastic in the package (game generation, transitions, opponents)
draws from this generator so that a seed pins down a run bit-for-bit,
independently of the numpy version installed.
"""

_MASK = (1 << 64) - 1


def splitmix64(state: int):
    """Return (next_state, output) for one splitmix64 step."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, z ^ (z >> 31)


def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & _MASK


class Xoshiro256:
    """xoshiro256** generator.

    >>> a, b = Xoshiro256(7), Xoshiro256(7)
    >>> a.next_u64() == b.next_u64()
    True
    """

    def __init__(self, seed: int):
        sm = int(seed) & _MASK
        s = []
        for _ in range(4):
            sm, out = splitmix64(sm)
            s.append(out)
        self._s = s

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & _MASK, 7) * 9) & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def random(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def random_open0(self) -> float:
        """Uniform double in (0, 1]."""
        return ((self.next_u64() >> 11) + 1) * (1.0 / 9007199254740992.0)

    def integers(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection (no modulo bias)."""
        if n <= 0:
            raise ValueError("n must be positive")
        bound = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < bound:
                return x % n

    def choice(self, probs) -> int:
        """Sample an index from a probability row by inverse CDF."""
        u = self.random()
        acc = 0.0
        last = 0
        for i, p in enumerate(probs):
            if p > 0.0:
                last = i
            acc += p
            if u < acc:
                return i
        # round-off left u above the running sum; fall back to the last support point
        return last


def derive_seed(*parts: int) -> int:
    """Mix several integers into one 64-bit seed (used for per-seed sub-streams)."""
    state = 0x6A09E667F3BCC909
    for p in parts:
        state, out = splitmix64(state ^ (int(p) & _MASK))
        state = out
    return state
