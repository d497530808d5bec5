"""Dense complex tensors with named legs, and the matrix factorizations built on them.

Legs are addressed by unique string labels rather than positions; every
operation that needs a matrix view of a tensor states explicitly which legs
form the rows and which form the columns.  Flattening of multiple legs into
one matrix index is always row-major in the order the legs are listed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatchError, LegError, NonHermitianError

DEFAULT_TOL = 1e-9


def default_tol(tol: float | None) -> float:
    return DEFAULT_TOL if tol is None else float(tol)


class DenseTensor:
    """Immutable complex tensor with uniquely named legs.

    Entries are stored row-major over ``shape``; all entries must be finite.
    """

    __slots__ = ("data", "legs")

    def __init__(self, data, legs: Sequence[str], *, copy: bool = True):
        arr = np.array(data, dtype=np.complex128, copy=copy)
        legs = tuple(str(x) for x in legs)
        if arr.ndim != len(legs):
            raise LegError(f"{len(legs)} legs for a rank-{arr.ndim} tensor")
        if len(set(legs)) != len(legs):
            raise LegError(f"duplicate leg labels in {legs}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("tensor entries must be finite")
        arr.setflags(write=False)
        self.data = arr
        self.legs = legs

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def leg_dim(self, leg: str) -> int:
        return self.data.shape[self._axis(leg)]

    def _axis(self, leg: str) -> int:
        try:
            return self.legs.index(leg)
        except ValueError:
            raise LegError(f"unknown leg {leg!r}; tensor has {self.legs}") from None

    def transpose_to(self, legs: Sequence[str]) -> "DenseTensor":
        legs = tuple(legs)
        if set(legs) != set(self.legs) or len(legs) != len(self.legs):
            raise LegError(f"{legs} is not a permutation of {self.legs}")
        perm = [self._axis(l) for l in legs]
        return DenseTensor(self.data.transpose(perm), legs, copy=False)

    def relabel(self, mapping: dict[str, str]) -> "DenseTensor":
        for old in mapping:
            self._axis(old)
        return DenseTensor(self.data, [mapping.get(l, l) for l in self.legs], copy=False)

    def conj(self) -> "DenseTensor":
        return DenseTensor(self.data.conj(), self.legs, copy=False)

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def matrix(self, row_legs: Sequence[str], col_legs: Sequence[str]) -> np.ndarray:
        """Row-major matrix view over the given leg partition."""
        row_legs, col_legs = tuple(row_legs), tuple(col_legs)
        if sorted(row_legs + col_legs) != sorted(self.legs):
            raise LegError(
                f"row legs {row_legs} and col legs {col_legs} must partition {self.legs}"
            )
        t = self.transpose_to(row_legs + col_legs)
        rows = int(np.prod([t.leg_dim(l) for l in row_legs], initial=1))
        return np.asarray(t.data).reshape(rows, -1)

    def view(self, row_legs: Sequence[str], col_legs: Sequence[str]) -> "MatrixView":
        return MatrixView(self, tuple(row_legs), tuple(col_legs))

    @classmethod
    def from_matrix(
        cls,
        m: np.ndarray,
        row_legs: Sequence[str],
        row_dims: Sequence[int],
        col_legs: Sequence[str],
        col_dims: Sequence[int],
    ) -> "DenseTensor":
        shape = tuple(row_dims) + tuple(col_dims)
        return cls(np.asarray(m).reshape(shape), tuple(row_legs) + tuple(col_legs))

    def to_json(self) -> dict:
        flat = self.data.reshape(-1)
        return {
            "legs": list(self.legs),
            "shape": list(self.shape),
            "data": [[float(z.real), float(z.imag)] for z in flat],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DenseTensor":
        shape = tuple(int(s) for s in obj["shape"])
        flat = np.array([complex(re, im) for re, im in obj["data"]], dtype=np.complex128)
        if flat.size != int(np.prod(shape, initial=1)):
            raise DimensionMismatchError("JSON data length does not match shape")
        return cls(flat.reshape(shape), obj["legs"])

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    def __repr__(self) -> str:
        legs = ", ".join(f"{l}:{d}" for l, d in zip(self.legs, self.shape))
        return f"DenseTensor({legs})"


@dataclass(frozen=True)
class MatrixView:
    """A tensor together with an ordered row/column leg partition."""

    tensor: DenseTensor
    row_legs: tuple[str, ...]
    col_legs: tuple[str, ...]

    def __post_init__(self):
        if sorted(self.row_legs + self.col_legs) != sorted(self.tensor.legs):
            raise LegError("row and column legs must partition the tensor legs")

    @property
    def matrix(self) -> np.ndarray:
        return self.tensor.matrix(self.row_legs, self.col_legs)

    def row_dims(self) -> tuple[int, ...]:
        return tuple(self.tensor.leg_dim(l) for l in self.row_legs)

    def col_dims(self) -> tuple[int, ...]:
        return tuple(self.tensor.leg_dim(l) for l in self.col_legs)


def contract(
    t1: DenseTensor,
    t2: DenseTensor,
    pairs: Iterable[tuple[str, str]],
) -> DenseTensor:
    """Contract paired legs of two tensors; no pairs gives the outer product.

    The result carries the unpaired legs of ``t1`` followed by those of ``t2``.
    """
    pairs = list(pairs)
    ax1 = [t1._axis(a) for a, _ in pairs]
    ax2 = [t2._axis(b) for _, b in pairs]
    for (a, b), i, j in zip(pairs, ax1, ax2):
        if t1.shape[i] != t2.shape[j]:
            raise DimensionMismatchError(
                f"leg {a!r} (dim {t1.shape[i]}) cannot pair with {b!r} (dim {t2.shape[j]})"
            )
    out1 = [l for l in t1.legs if l not in {a for a, _ in pairs}]
    out2 = [l for l in t2.legs if l not in {b for _, b in pairs}]
    clash = set(out1) & set(out2)
    if clash:
        raise LegError(f"unpaired legs {sorted(clash)} appear in both tensors")
    data = np.tensordot(t1.data, t2.data, axes=(ax1, ax2))
    return DenseTensor(data, out1 + out2, copy=False)


# ---------------------------------------------------------------------------
# ndarray-level numerics shared across the package
# ---------------------------------------------------------------------------


def polar_nd(m: np.ndarray, tol: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Polar factorization m = V @ Q.

    Q = (m† m)^{1/2} is Hermitian PSD; V is the partial isometry supported
    exactly on range(Q), so V† V equals the orthogonal projector onto
    range(Q) and V @ Q reconstructs m.
    """
    m = np.asarray(m, dtype=np.complex128)
    u, s, wh = np.linalg.svd(m, full_matrices=False)
    q = (wh.conj().T * s) @ wh
    cutoff = default_tol(tol) * (s[0] if s.size and s[0] > 0 else 1.0)
    r = int(np.sum(s > cutoff))
    v = u[:, :r] @ wh[:r, :]
    return v, q


def numerical_rank(m: np.ndarray, tol: float | None = None) -> int:
    s = np.linalg.svd(np.asarray(m), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > default_tol(tol) * s[0]))


def nullspace(m: np.ndarray, tol: float | None = None) -> np.ndarray:
    """Orthonormal columns spanning the (right) null space of m."""
    m = np.asarray(m, dtype=np.complex128)
    if m.size == 0:
        return np.eye(m.shape[1], dtype=np.complex128)
    u, s, wh = np.linalg.svd(m)
    cutoff = default_tol(tol) * (s[0] if s.size and s[0] > 0 else 1.0)
    r = int(np.sum(s > cutoff))
    return wh[r:].conj().T


def pinv_nd(m: np.ndarray, tol: float) -> np.ndarray:
    """Moore-Penrose pseudo-inverse with relative singular-value cutoff."""
    m = np.asarray(m, dtype=np.complex128)
    u, s, wh = np.linalg.svd(m, full_matrices=False)
    cutoff = tol * (s[0] if s.size and s[0] > 0 else 1.0)
    inv = np.where(s > cutoff, 1.0 / np.where(s > cutoff, s, 1.0), 0.0)
    return (wh.conj().T * inv) @ u.conj().T


def proportionality(a: np.ndarray, b: np.ndarray) -> tuple[complex, float]:
    """Least-squares factor c minimizing ||a - c b||, and the residual.

    The residual is relative to ||a|| when a is nonzero.
    """
    a = np.asarray(a).reshape(-1)
    b = np.asarray(b).reshape(-1)
    bb = np.vdot(b, b).real
    c = np.vdot(b, a) / bb if bb > 0 else 0.0 + 0.0j
    na = np.linalg.norm(a)
    resid = np.linalg.norm(a - c * b) / (na if na > 0 else 1.0)
    return complex(c), float(resid)


def state_fidelity(x: np.ndarray, y: np.ndarray) -> float:
    """|<x|y>|^2 / (|x|^2 |y|^2): quotient by scale and global phase."""
    x = np.asarray(x).reshape(-1)
    y = np.asarray(y).reshape(-1)
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx == 0 or ny == 0:
        return 0.0
    return float(abs(np.vdot(x, y)) ** 2 / (nx**2 * ny**2))


def projector_onto(columns: np.ndarray) -> np.ndarray:
    """Orthogonal projector onto the column span."""
    cols = np.asarray(columns, dtype=np.complex128)
    if cols.ndim == 1:
        cols = cols[:, None]
    if cols.shape[1] == 0:
        return np.zeros((cols.shape[0], cols.shape[0]), dtype=np.complex128)
    q, _ = np.linalg.qr(cols)
    return q @ q.conj().T


def procrustes_unitary(target: np.ndarray, source: np.ndarray) -> np.ndarray:
    """Unitary U minimizing ||U @ source - target|| in Frobenius norm."""
    u, _, wh = np.linalg.svd(target @ source.conj().T)
    return u @ wh


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


# ---------------------------------------------------------------------------
# leg-level factorizations
# ---------------------------------------------------------------------------


def polar_decompose(m: MatrixView, tol: float | None = None) -> tuple[DenseTensor, DenseTensor]:
    """Polar split of a matrix view into (V, Q) tensors.

    V keeps the legs of the original tensor (same shapes); Q is square over
    the column legs, with the output copies primed (``leg'``).
    """
    v, q = polar_nd(m.matrix, tol)
    vt = DenseTensor.from_matrix(v, m.row_legs, m.row_dims(), m.col_legs, m.col_dims())
    primed = tuple(l + "'" for l in m.col_legs)
    qt = DenseTensor.from_matrix(q, primed, m.col_dims(), m.col_legs, m.col_dims())
    return vt, qt


def eig_hermitian(m: MatrixView, tol: float = 1e-10) -> tuple[list[float], DenseTensor]:
    """Eigenvalues (descending) and orthonormal eigenvectors of a Hermitian view."""
    mat = m.matrix
    if mat.shape[0] != mat.shape[1]:
        raise DimensionMismatchError("eig_hermitian needs a square view")
    dev = np.linalg.norm(mat - mat.conj().T)
    scale = max(np.linalg.norm(mat), 1.0)
    if dev > tol * scale:
        raise NonHermitianError(f"matrix deviates from Hermitian by {dev:.3e}")
    vals, vecs = np.linalg.eigh((mat + mat.conj().T) / 2)
    order = np.argsort(vals)[::-1]
    vals = vals[order]
    vecs = vecs[:, order]
    vectors = DenseTensor(vecs, ("basis", "mode"))
    return [float(v) for v in vals], vectors


def pseudo_inverse(m: MatrixView, tol: float) -> DenseTensor:
    """Moore-Penrose pseudo-inverse; legs swap sides relative to the view."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    p = pinv_nd(m.matrix, tol)
    return DenseTensor.from_matrix(p, m.col_legs, m.col_dims(), m.row_legs, m.row_dims())
