"""Seeded test series: white noise, noisy sines, AR(1) processes and ramps."""

import numpy as np

KINDS = ("noise", "sine", "ar1", "ramp")


def make_series(i: int, rng: np.random.Generator) -> np.ndarray:
    n = int(rng.integers(200, 700))
    kind = KINDS[i % 4]
    t = np.arange(n)
    if kind == "noise":
        return rng.standard_normal(n)
    if kind == "sine":
        return np.sin(2 * np.pi * t / rng.uniform(5, 60) + rng.uniform(0, 6)) + 0.1 * rng.standard_normal(n)
    if kind == "ar1":
        phi = rng.uniform(-0.95, 0.95)
        x, e = np.zeros(n), rng.standard_normal(n)
        for k in range(1, n):
            x[k] = phi * x[k - 1] + e[k]
        return x
    # every other ramp is exact, so the degenerate paths get exercised too
    return rng.uniform(0.5, 3) * t / n + rng.uniform(-1, 1) + (0.05 * rng.standard_normal(n) if i % 8 == 3 else 0)


def corpus(count: int = 50, seed: int = 2024):
    rng = np.random.default_rng(seed)
    return [(KINDS[i % 4], make_series(i, rng)) for i in range(count)]
