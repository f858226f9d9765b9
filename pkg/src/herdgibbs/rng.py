"""Portable seeded random streams.

Every random number in the package comes from :class:`Stream`, which wraps
the raw 64-bit output of PCG64 (O'Neill's permuted congruential generator,
XSL-RR 128/64 variant) seeded through NumPy's ``SeedSequence``.  Only the raw
integer stream is used; the conversions below are written out here so the
outputs are bit-exact across NumPy versions:

* uniform double in [0, 1):  ``(r >> 11) * 2**-53``
* standard normal pairs (Box-Muller):  with ``u1 = 1 - U``, ``u2 = U'``,
  ``z0 = sqrt(-2 ln u1) cos(2 pi u2)``, ``z1 = sqrt(-2 ln u1) sin(2 pi u2)``
"""

from __future__ import annotations

import numpy as np

_TWO_POW_M53 = 2.0**-53


def derive_seed(*parts: int) -> np.random.SeedSequence:
    """Seed material for a sub-stream, e.g. ``derive_seed(base, replicate, purpose)``."""
    return np.random.SeedSequence([int(p) & 0xFFFFFFFFFFFFFFFF for p in parts])


class Stream:
    def __init__(self, *seed_parts: int):
        if not seed_parts:
            raise ValueError("a stream needs at least one seed component")
        self._bits = np.random.PCG64(derive_seed(*seed_parts))

    def raw(self, n: int) -> np.ndarray:
        return self._bits.random_raw(int(n))

    def uniforms(self, n: int) -> np.ndarray:
        return (self.raw(n) >> np.uint64(11)).astype(np.float64) * _TWO_POW_M53

    def normals(self, n: int) -> np.ndarray:
        n = int(n)
        m = (n + 1) // 2
        u = self.uniforms(2 * m)
        radius = np.sqrt(-2.0 * np.log1p(-u[0::2]))
        angle = 2.0 * np.pi * u[1::2]
        z = np.empty(2 * m)
        z[0::2] = radius * np.cos(angle)
        z[1::2] = radius * np.sin(angle)
        return z[:n]
