"""Construct the packaged rank-1 lattice generating vector.

Builds a 600-component generating vector for base-2 node sequences with
modulus 2**20 by a seeded component-by-component search: for each new
component, 64 random odd candidates are scored with a product-weighted
P2-style worst-case figure evaluated on the embedded node sets at levels
2**13 and 2**17, and the best candidate is kept.  Weights are 1/j^2.

The result is deterministic (fixed seed) and is written one decimal
integer per line to src/qmcube/data/lattice-m20.600.txt.

Run from the repository root:

    python3 tools/make_lattice_vector.py
"""

import os

import numpy as np

OUT = os.path.join("src", "qmcube", "data", "lattice-m20.600.txt")
M_MAX = 20
DIMENSIONS = 600
CANDIDATES = 64
LEVELS = (13, 17)
SEED = 20170101


def bernoulli_kernel(frac: np.ndarray) -> np.ndarray:
    """2*pi^2*B2(x), the order-2 worst-case error kernel."""
    return 2.0 * np.pi**2 * (frac * frac - frac + 1.0 / 6.0)


def main() -> None:
    rng = np.random.default_rng(SEED)
    modulus = 1 << M_MAX

    kvals = {m: np.arange(1 << m, dtype=np.int64) for m in LEVELS}
    # Running per-point products of the already-chosen components.
    prods = {m: np.ones(1 << m) for m in LEVELS}

    def admit(component: int, z: int, weight: float) -> None:
        for m in LEVELS:
            n = 1 << m
            frac = ((kvals[m] * z) % n) / n
            prods[m] *= 1.0 + weight * bernoulli_kernel(frac)

    gen = [1]
    admit(1, 1, 1.0)
    for j in range(2, DIMENSIONS + 1):
        weight = 1.0 / j**2
        cand = 2 * rng.integers(0, modulus // 2, size=CANDIDATES, dtype=np.int64) + 1
        scores = np.zeros(CANDIDATES)
        for m in LEVELS:
            n = 1 << m
            frac = ((np.outer(cand, kvals[m])) % n) / n
            scores += (1.0 + weight * bernoulli_kernel(frac)) @ prods[m] / n
        best = int(cand[int(np.argmin(scores))])
        gen.append(best)
        admit(j, best, weight)

    os.makedirs(os.path.dirname(OUT), exist_ok=True)
    with open(OUT, "w", encoding="ascii") as fh:
        fh.write("\n".join(str(z) for z in gen) + "\n")
    print(f"wrote {OUT} ({DIMENSIONS} components, modulus 2^{M_MAX})")


if __name__ == "__main__":
    main()
