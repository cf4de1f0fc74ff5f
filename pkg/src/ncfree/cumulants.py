"""Joint cumulants of bivariate scalar laws and the cumulant expansion check.

The expansion E[u Phi(u,v)] = sum_{a+b<=ell} kappa_{a+1,b}/(a! b!)
E[d_u^a d_v^b Phi] + eps_{ell+1} generalizes Gaussian integration by parts;
for polynomial Phi of joint degree <= ell the remainder vanishes identically,
and for discrete laws everything is computed by exact enumeration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ensembles import EntryLaw, SeedStream

__all__ = [
    "ScalarLaw",
    "CumulantTable",
    "joint_cumulants",
    "joint_cumulants_empirical",
    "cumulant_expansion_check",
]


@dataclass(frozen=True)
class ScalarLaw:
    """A unit law scaled by a constant; ``law=None`` is the zero variable."""

    law: EntryLaw | None
    scale: float = 1.0

    def moment(self, p: int) -> float:
        if p == 0:
            return 1.0
        if self.law is None:
            return 0.0
        return self.scale**p * self.law.moment(p)

    def atoms(self):
        """(values, weights) for discrete laws, else None."""
        if self.law is None:
            return np.array([0.0]), np.array([1.0])
        if self.law.kind == "rademacher":
            return self.scale * np.array([-1.0, 1.0]), np.array([0.5, 0.5])
        if self.law.kind == "custom":
            return (self.scale * np.asarray(self.law.atoms, dtype=float),
                    np.asarray(self.law.weights, dtype=float))
        return None

    def draw(self, gen, size):
        if self.law is None:
            return np.zeros(size)
        return self.scale * self.law.draw(gen, size)


@dataclass(frozen=True)
class CumulantTable:
    """kappa[n, m] for n + m <= ell."""

    kappa: np.ndarray
    ell: int

    def __getitem__(self, nm):
        n, m = nm
        return self.kappa[n, m]


def _moment_table(u: ScalarLaw, v: ScalarLaw, order: int) -> np.ndarray:
    mu = np.zeros((order + 1, order + 1))
    for n in range(order + 1):
        for m in range(order + 1 - n):
            mu[n, m] = u.moment(n) * v.moment(m)
    return mu


def _moment_table_empirical(us, vs, order: int) -> np.ndarray:
    us = np.asarray(us, dtype=float)
    vs = np.zeros_like(us) if vs is None else np.asarray(vs, dtype=float)
    mu = np.zeros((order + 1, order + 1))
    for n in range(order + 1):
        for m in range(order + 1 - n):
            mu[n, m] = float(np.mean(us**n * vs**m))
    return mu


def _cumulants_from_moments(mu: np.ndarray, ell: int) -> CumulantTable:
    # invert mu_{n+1,m} = sum_{a<=n,b<=m} C(n,a) C(m,b) kappa_{a+1,b} mu_{n-a,m-b}
    # (and the u<->v transpose for kappa_{0,m}) order by order
    kappa = np.zeros((ell + 1, ell + 1))
    for total in range(1, ell + 1):
        for n in range(total + 1):
            m = total - n
            if n >= 1:
                acc = 0.0
                for a in range(n):
                    for b in range(m + 1):
                        if (a, b) == (n - 1, m):
                            continue
                        acc += (math.comb(n - 1, a) * math.comb(m, b)
                                * kappa[a + 1, b] * mu[n - 1 - a, m - b])
                kappa[n, m] = mu[n, m] - acc
            else:
                acc = 0.0
                for b in range(m - 1):
                    acc += math.comb(m - 1, b) * kappa[0, b + 1] * mu[0, m - 1 - b]
                kappa[0, m] = mu[0, m] - acc
    return CumulantTable(kappa, ell)


def joint_cumulants(u: ScalarLaw, v: ScalarLaw | None = None,
                    ell: int = 4) -> CumulantTable:
    """Cumulant table of an independent pair given analytically."""
    if ell > 6:
        raise ValueError("cumulant order capped at 6")
    v = v if v is not None else ScalarLaw(None)
    return _cumulants_from_moments(_moment_table(u, v, ell), ell)


def joint_cumulants_empirical(us, vs=None, ell: int = 4) -> CumulantTable:
    if ell > 6:
        raise ValueError("cumulant order capped at 6")
    us = np.asarray(us, dtype=float)
    if us.size < 10 * (ell + 1):
        raise ValueError("insufficient samples for the requested order")
    return _cumulants_from_moments(_moment_table_empirical(us, vs, ell), ell)


def _falling(n: int, k: int) -> int:
    if k > n:
        return 0
    out = 1
    for j in range(k):
        out *= n - j
    return out


def cumulant_expansion_check(u: ScalarLaw, v: ScalarLaw | None, phi, ell: int,
                             samples: int = 0,
                             stream: SeedStream | None = None):
    """Residual eps_{ell+1} of the order-ell cumulant expansion for Phi.

    phi is ("monomial", a, b) or ("fourier", t, s).  Monomials and discrete
    laws are handled exactly; otherwise a Monte Carlo estimate over ``samples``
    draws is returned.  Returns (residual, stderr) with stderr 0.0 on exact
    paths.
    """
    v = v if v is not None else ScalarLaw(None)
    kind = phi[0]
    if kind == "monomial":
        _, a, b = phi
        if a + b > 6:
            raise ValueError("monomial degree capped at 6")
        order = max(ell + 1, a + b + 1)
        mu = _moment_table(u, v, order)
        kap = _cumulants_from_moments(mu, ell + 1).kappa
        lhs = mu[a + 1, b]
        rhs = 0.0
        for al in range(ell + 1):
            for be in range(ell + 1 - al):
                fall = _falling(a, al) * _falling(b, be)
                if fall == 0:
                    continue
                rhs += (kap[al + 1, be] / (math.factorial(al) * math.factorial(be))
                        * fall * mu[a - al, b - be])
        return lhs - rhs, 0.0
    if kind != "fourier":
        raise ValueError(f"unsupported test functional {phi!r}")

    _, t, s = phi
    kap = _cumulants_from_moments(_moment_table(u, v, ell + 1), ell + 1).kappa
    coefs = {}
    for al in range(ell + 1):
        for be in range(ell + 1 - al):
            c = (kap[al + 1, be] / (math.factorial(al) * math.factorial(be))
                 * (1j * t) ** al * (1j * s) ** be)
            if c != 0:
                coefs[(al, be)] = c
    csum = sum(coefs.values())

    ua = u.atoms()
    va = v.atoms()
    if ua is not None and va is not None:
        uu, wu = ua
        vv, wv = va
        lhs = 0j
        ephi = 0j
        for x, wx in zip(uu, wu):
            for yv, wy in zip(vv, wv):
                w = wx * wy
                p = np.exp(1j * (t * x + s * yv))
                lhs += w * x * p
                ephi += w * p
        return lhs - csum * ephi, 0.0

    if samples < 100:
        raise ValueError("Monte Carlo path needs at least 100 samples")
    gen = (stream or SeedStream(0)).generator()
    us = u.draw(gen, samples)
    vs = v.draw(gen, samples)
    p = np.exp(1j * (t * us + s * vs))
    r = us * p - csum * p
    resid = complex(r.mean())
    stderr = float(np.sqrt((r.real.var(ddof=1) + r.imag.var(ddof=1)) / samples))
    return resid, stderr
