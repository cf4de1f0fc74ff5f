"""Finite atomic Fourier representations of test functions.

A :class:`FourierSum` encodes ``f(t) = sum_j c_j exp(i t y_j)`` as a finite
list of atoms ``(c_j, y_j)``, or the identity function ``t -> t`` via a flag.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["FourierSum"]


@dataclass(frozen=True)
class FourierSum:
    atoms: tuple = ()
    is_identity: bool = False

    def __post_init__(self):
        if self.is_identity and self.atoms:
            raise ValueError("identity function carries no atoms")

    @classmethod
    def identity(cls) -> "FourierSum":
        return cls((), True)

    @classmethod
    def from_atoms(cls, pairs) -> "FourierSum":
        merged: dict = {}
        for c, y in pairs:
            y = float(y)
            merged[y] = merged.get(y, 0j) + complex(c)
        atoms = tuple(sorted(((c, y) for y, c in merged.items() if c != 0),
                             key=lambda cy: cy[1]))
        return cls(atoms, False)

    @classmethod
    def from_config(cls, value) -> "FourierSum":
        """Accepts the string "id" or a list of [re, im, y] triples."""
        if isinstance(value, str):
            if value.strip() == "id":
                return cls.identity()
            raise ValueError(f"unknown Fourier function spec {value!r}")
        return cls.from_atoms((complex(re, im), y) for re, im, y in value)

    def __call__(self, t):
        """Pointwise values on a scalar or array argument."""
        t = np.asarray(t)
        if self.is_identity:
            return t.astype(complex)
        out = np.zeros(t.shape, dtype=complex)
        for c, y in self.atoms:
            out += c * np.exp(1j * y * t)
        return out

    def scale_frequencies(self, s: float) -> "FourierSum":
        if self.is_identity:
            return self
        return FourierSum.from_atoms((c, s * y) for c, y in self.atoms)
