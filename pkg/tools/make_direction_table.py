"""Regenerate the packaged direction-number table.

Emits the first 1024 coordinates of the Joe-Kuo "new-joe-kuo-6" direction
numbers in the standard text layout (header line, then one line per
dimension: ``d s a m_1 ... m_s``).  The raw data is read from the archive
that ships with scipy, which carries the same published table.

Run from the repository root:

    python3 tools/make_direction_table.py
"""

import os

import numpy as np
import scipy.stats

OUT = os.path.join("src", "qmcube", "data", "joe-kuo-6.1024.txt")
DIMENSIONS = 1024


def main() -> None:
    archive = os.path.join(
        os.path.dirname(scipy.stats.__file__), "_sobol_direction_numbers.npz"
    )
    npz = np.load(archive)
    poly, vinit = npz["poly"], npz["vinit"]

    lines = ["d       s       a       m_i"]
    # Dimension 1 is the plain radical-inverse coordinate and is implicit.
    for dim in range(2, DIMENSIONS + 1):
        p = int(poly[dim - 1])
        s = p.bit_length() - 1
        a = (p - (1 << s) - 1) // 2
        m = [str(int(v)) for v in vinit[dim - 1][:s]]
        lines.append(f"{dim}\t{s}\t{a}\t" + " ".join(m))

    os.makedirs(os.path.dirname(OUT), exist_ok=True)
    with open(OUT, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"wrote {OUT} ({DIMENSIONS} dimensions)")


if __name__ == "__main__":
    main()
