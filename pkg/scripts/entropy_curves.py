"""Entropy-rate reduction from keeping correlation inside blocks.

Prints, for several AR(1) correlations, how much of the full-memory
entropy reduction a block of ``b`` samples already captures, in bits per
complex sample.
"""

import numpy as np

from grandai.analysis import bits, block_entropy_rate, gm1_entropy_rate

RHOS = [0.25, 0.5, 0.75, 0.9]
BLOCKS = [1, 2, 4, 8, 16]
N = 4096


def main():
    print("rho   " + "".join(f"   b={b:<4d}" for b in BLOCKS) + "   full")
    for rho in RHOS:
        full = gm1_entropy_rate(rho, 1.0, N).correlation_term
        row = [block_entropy_rate(rho, 1.0, b).correlation_term for b in BLOCKS]
        print(f"{rho:<5} " + "".join(f"  {bits(c) + 0.0:+.4f}" for c in row) + f"  {bits(full) + 0.0:+.4f}")
    print()
    print("fraction of the full reduction captured")
    for rho in RHOS:
        full = gm1_entropy_rate(rho, 1.0, N).correlation_term
        frac = np.array([block_entropy_rate(rho, 1.0, b).correlation_term for b in BLOCKS]) / full
        print(f"{rho:<5} " + "".join(f"  {f:7.3f}" for f in frac))


if __name__ == "__main__":
    main()
