"""NCFM1/NCFV1 ASCII matrix and vector files.

Matrix format: line "NCFM1", line "N <dim>", then dim*dim lines "re im" in
row-major order, 17 significant digits.  Vectors use magic "NCFV1" and dim
entry lines.
"""

from __future__ import annotations

import numpy as np

__all__ = ["write_matrix", "read_matrix", "write_vector", "read_vector"]

_MAT_MAGIC = "NCFM1"
_VEC_MAGIC = "NCFV1"


def _write(path, magic: str, dim: int, flat) -> None:
    lines = [magic, f"N {dim}"]
    lines.extend(f"{z.real:.17e} {z.imag:.17e}" for z in flat)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _read(path, magic: str):
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != magic:
        raise ValueError(f"{path}: missing {magic} magic")
    head = lines[1].split()
    if len(head) != 2 or head[0] != "N":
        raise ValueError(f"{path}: malformed dimension line {lines[1]!r}")
    dim = int(head[1])
    body = lines[2:]
    expected = dim * dim if magic == _MAT_MAGIC else dim
    if len(body) != expected:
        raise ValueError(f"{path}: expected {expected} entries, found {len(body)}")
    vals = np.empty(expected, dtype=complex)
    for k, ln in enumerate(body):
        re_s, im_s = ln.split()
        vals[k] = complex(float(re_s), float(im_s))
    return dim, vals


def write_matrix(path, M) -> None:
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    _write(path, _MAT_MAGIC, M.shape[0], M.reshape(-1))


def read_matrix(path) -> np.ndarray:
    dim, vals = _read(path, _MAT_MAGIC)
    return vals.reshape(dim, dim)


def write_vector(path, v) -> None:
    v = np.asarray(v, dtype=complex)
    if v.ndim != 1:
        raise ValueError("vector must be one-dimensional")
    _write(path, _VEC_MAGIC, v.shape[0], v)


def read_vector(path) -> np.ndarray:
    dim, vals = _read(path, _VEC_MAGIC)
    return vals.reshape(dim)
