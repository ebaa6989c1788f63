"""
Seed derivation for Monte-Carlo trials.

Every trial seed is a pure function of the master seed and integer keys, so
sweeps can be split across workers without coordination.
"""

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def mix64(value):
    """
    SplitMix64 finalizer.

    Args:
        value (int): Any integer; only its low 64 bits are used

    Returns:
        int: Mixed 64-bit value
    """
    z = (value + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed, *keys):
    """
    Fold integer keys into the master seed.

    state <- mix64(state XOR mix64(key)) for each key, starting from
    mix64(master_seed).

    Args:
        master_seed (int): Experiment master seed
        *keys (int): Axis index, trial index, ...

    Returns:
        int: 64-bit trial seed
    """
    state = mix64(master_seed & MASK64)
    for key in keys:
        state = mix64(state ^ mix64(int(key) & MASK64))
    return state
