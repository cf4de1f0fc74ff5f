"""Reproducible Wigner-type samplers and the Ornstein-Uhlenbeck interpolation.

Entry laws are normalized to mean 0 and variance 1 and scaled by 1/sqrt(N) at
assembly time.  Sampling is keyed by counter-based Philox streams so that any
(experiment, sample, matrix) coordinate can be drawn independently and in any
order with bit-identical results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "EntryLaw",
    "EnsembleSpec",
    "SeedStream",
    "gue",
    "goe",
    "wigner",
    "sample",
    "interpolate",
    "entry_moment_report",
    "EntryMomentReport",
]

_SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class EntryLaw:
    """Mean-0, variance-1 real scalar law.

    kind: "gaussian" | "rademacher" | "uniform" | "custom"
    Custom laws are discrete with the given atoms and weights.
    """

    kind: str
    atoms: tuple = ()
    weights: tuple = ()

    def __post_init__(self):
        if self.kind in ("gaussian", "rademacher", "uniform"):
            if self.atoms or self.weights:
                raise ValueError(f"{self.kind} law takes no atoms")
            return
        if self.kind != "custom":
            raise ValueError(f"unknown entry law {self.kind!r}")
        a = np.asarray(self.atoms, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if a.shape != w.shape or a.ndim != 1 or not len(a):
            raise ValueError("custom law needs matching atoms and weights")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("custom law weights must be a distribution")
        mean = float(w @ a)
        var = float(w @ a**2) - mean**2
        if abs(mean) > 1e-12 or abs(var - 1.0) > 1e-12:
            raise ValueError(
                f"custom law not normalized: mean={mean:.3e}, var={var:.6f}"
            )

    def draw(self, gen: np.random.Generator, size):
        if self.kind == "gaussian":
            return gen.standard_normal(size)
        if self.kind == "rademacher":
            return 2.0 * gen.integers(0, 2, size=size).astype(float) - 1.0
        if self.kind == "uniform":
            return gen.uniform(-_SQRT3, _SQRT3, size=size)
        return gen.choice(np.asarray(self.atoms, dtype=float), size=size,
                          p=np.asarray(self.weights, dtype=float))

    def moment(self, p: int) -> float:
        """Exact E[u^p]."""
        if p < 0:
            raise ValueError("moment order must be non-negative")
        if p == 0:
            return 1.0
        if self.kind == "gaussian":
            if p % 2:
                return 0.0
            out = 1.0
            for m in range(1, p, 2):
                out *= m
            return out
        if self.kind == "rademacher":
            return 0.0 if p % 2 else 1.0
        if self.kind == "uniform":
            return 0.0 if p % 2 else _SQRT3**p / (p + 1)
        a = np.asarray(self.atoms, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        return float(w @ a**p)


GAUSSIAN = EntryLaw("gaussian")


@dataclass(frozen=True)
class EnsembleSpec:
    N: int
    symmetry: str  # "hermitian" | "symmetric"
    offdiag: EntryLaw = GAUSSIAN
    diag: EntryLaw = GAUSSIAN
    diag_variance: float = 1.0  # sigma_d^2; diagonal entries have variance sigma_d^2/N

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be positive")
        if self.symmetry not in ("hermitian", "symmetric"):
            raise ValueError(f"unknown symmetry class {self.symmetry!r}")
        if self.diag_variance <= 0:
            raise ValueError("diag_variance must be positive")


def gue(N: int) -> EnsembleSpec:
    """Hermitian; sqrt(N) X_ii and sqrt(2N) Re/Im X_ij standard normal."""
    return EnsembleSpec(N, "hermitian", GAUSSIAN, GAUSSIAN, 1.0)


def goe(N: int) -> EnsembleSpec:
    """Symmetric; sqrt(N/2) X_ii and sqrt(N) X_ij standard normal."""
    return EnsembleSpec(N, "symmetric", GAUSSIAN, GAUSSIAN, 2.0)


def wigner(N: int, law: EntryLaw, symmetry: str = "symmetric",
           diag_law: EntryLaw | None = None,
           diag_variance: float | None = None) -> EnsembleSpec:
    if diag_variance is None:
        diag_variance = 1.0 if symmetry == "hermitian" else 2.0
    return EnsembleSpec(N, symmetry, law, diag_law or law, diag_variance)


@dataclass(frozen=True)
class SeedStream:
    """Coordinates into a counter-based random stream."""

    master: int
    experiment: int = 0
    sample: int = 0
    matrix: int = 0

    def with_coords(self, experiment=None, sample=None, matrix=None):
        return replace(
            self,
            experiment=self.experiment if experiment is None else experiment,
            sample=self.sample if sample is None else sample,
            matrix=self.matrix if matrix is None else matrix,
        )

    def generator(self) -> np.random.Generator:
        mask = (1 << 64) - 1
        bitgen = np.random.Philox(
            key=self.master & ((1 << 128) - 1),
            counter=[0, self.matrix & mask, self.sample & mask,
                     self.experiment & mask],
        )
        return np.random.Generator(bitgen)


def sample(spec: EnsembleSpec, stream: SeedStream) -> np.ndarray:
    """Draw one matrix; Hermitian/symmetric exactly by construction."""
    gen = stream.generator()
    N = spec.N
    scale = 1.0 / math.sqrt(N)
    if (spec.offdiag.kind == "gaussian" and spec.diag.kind == "gaussian"
            and spec.diag_variance == (1.0 if spec.symmetry == "hermitian"
                                       else 2.0)):
        # (G + G*)/2 reproduces the Gaussian entry laws exactly, without
        # triangular assembly
        if spec.symmetry == "hermitian":
            G = gen.standard_normal((N, N)) + 1j * gen.standard_normal((N, N))
            return (G + G.conj().T) * (0.5 * scale)
        G = gen.standard_normal((N, N))
        return (G + G.T) * (0.5 * math.sqrt(2.0) * scale)
    iu = np.triu_indices(N, 1)
    if spec.symmetry == "hermitian":
        u = spec.offdiag.draw(gen, (N, N))
        v = spec.offdiag.draw(gen, (N, N))
        dvals = spec.diag.draw(gen, N)
        H = np.zeros((N, N), dtype=complex)
        H[iu] = (u[iu] + 1j * v[iu]) / math.sqrt(2.0) * scale
        H = H + H.conj().T
        H[np.diag_indices(N)] = math.sqrt(spec.diag_variance) * dvals * scale
        return H
    u = spec.offdiag.draw(gen, (N, N))
    dvals = spec.diag.draw(gen, N)
    S = np.zeros((N, N), dtype=float)
    S[iu] = u[iu] * scale
    S = S + S.T
    S[np.diag_indices(N)] = math.sqrt(spec.diag_variance) * dvals * scale
    return S


def interpolate(Y: np.ndarray, X: np.ndarray, t: float) -> np.ndarray:
    """Y e^{-t/2} + X (1 - e^{-t})^{1/2}."""
    Y = np.asarray(Y)
    X = np.asarray(X)
    if Y.shape != X.shape:
        raise ValueError("dimension mismatch")
    if t < 0:
        raise ValueError("interpolation time must be non-negative")
    return Y * math.exp(-t / 2.0) + X * math.sqrt(1.0 - math.exp(-t))


@dataclass(frozen=True)
class EntryMomentReport:
    p: int
    draws: int
    offdiag_mean: float
    offdiag_se: float
    diag_mean: float
    diag_se: float


def entry_moment_report(spec: EnsembleSpec, p: int, draws: int,
                        stream: SeedStream) -> EntryMomentReport:
    """Empirical E[|sqrt(N) entry|^p] with standard errors, per entry class."""
    if p % 2 or p < 2:
        raise ValueError("p must be a positive even integer")
    if p > 12:
        raise ValueError("p must be at most 12")
    gen = stream.generator()
    if spec.symmetry == "hermitian":
        u = spec.offdiag.draw(gen, draws)
        v = spec.offdiag.draw(gen, draws)
        off = ((u**2 + v**2) / 2.0) ** (p // 2)
    else:
        off = np.abs(spec.offdiag.draw(gen, draws)) ** p
    diag = np.abs(math.sqrt(spec.diag_variance) * spec.diag.draw(gen, draws)) ** p
    return EntryMomentReport(
        p=p,
        draws=draws,
        offdiag_mean=float(off.mean()),
        offdiag_se=float(off.std(ddof=1) / math.sqrt(draws)),
        diag_mean=float(diag.mean()),
        diag_se=float(diag.std(ddof=1) / math.sqrt(draws)),
    )
