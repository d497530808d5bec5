"""Measurement-and-feedback bases: complete orthogonal sets of D x D unitaries.

An MF basis holds the D^2 unitaries labelling the maximally entangled states
a bond is measured in.  Weyl-Heisenberg groups, composite-dimension products,
and Hadamard/Latin-square constructions are provided, along with group
closure detection and cocycle (commutation phase) tables.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import BasisError, NonGroupBasisError
from .tensors import DenseTensor, default_tol


@dataclass(frozen=True)
class CocycleTable:
    """Commutation phases omega(j,k) with P_k P_j = omega(j,k) P_j P_k."""

    dim_sq: int
    phases: np.ndarray

    def __post_init__(self):
        ph = np.asarray(self.phases, dtype=np.complex128)
        if ph.shape != (self.dim_sq, self.dim_sq):
            raise BasisError("cocycle table must be D^2 x D^2")
        if not np.allclose(np.abs(ph), 1.0, atol=1e-9):
            raise BasisError("cocycle phases must have unit modulus")
        if not np.allclose(np.diag(ph), 1.0, atol=1e-9):
            raise BasisError("omega(j,j) must be 1")
        object.__setattr__(self, "phases", ph)

    def omega(self, j: int, k: int) -> complex:
        return complex(self.phases[j, k])


class MFBasis:
    """A set of D^2 unitaries with Tr(P_i† P_j) = D delta_ij.

    Elements are stored unnormalized; the 1/sqrt(D) measurement-state
    normalization is applied at use sites.
    """

    def __init__(self, dim, elements, labels=None, is_group=None, cocycle=None, tol=None):
        self.dim = int(dim)
        self.elements = [np.array(e, dtype=np.complex128) for e in elements]
        for e in self.elements:
            e.setflags(write=False)
        self.labels = list(labels) if labels is not None else [f"P{i}" for i in range(len(self.elements))]
        self.is_group = is_group
        self.cocycle = cocycle
        self._validate(default_tol(tol))
        self._product_cache = None
        self._dagger_cache = None

    def _validate(self, tol: float) -> None:
        d = self.dim
        if len(self.elements) != d * d:
            raise BasisError(f"need {d*d} elements, got {len(self.elements)}")
        if len(self.labels) != d * d or len(set(self.labels)) != d * d:
            raise BasisError("labels must be unique, one per element")
        eye = np.eye(d)
        for lab, p in zip(self.labels, self.elements):
            if p.shape != (d, d):
                raise BasisError(f"element {lab} is not {d}x{d}")
            if np.linalg.norm(p @ p.conj().T - eye) > 1e-7 * d:
                raise BasisError(f"element {lab} is not unitary")
        gram = self.completeness_map()
        if np.linalg.norm(gram.conj().T @ gram - np.eye(d * d)) > 1e-7 * d * d:
            raise BasisError("orthogonality/completeness failure: |i> -> vec(P_i)/sqrt(D) is not unitary")

    def __len__(self) -> int:
        return len(self.elements)

    def element(self, key) -> np.ndarray:
        return self.elements[self.index(key)]

    def index(self, key) -> int:
        if isinstance(key, (int, np.integer)):
            return int(key)
        return self.labels.index(key)

    @property
    def identity_index(self) -> int:
        idx, phase = self.resolve(np.eye(self.dim))
        return idx

    def completeness_map(self) -> np.ndarray:
        """Matrix whose i-th column is vec(P_i)/sqrt(D)."""
        d = self.dim
        return np.stack([p.reshape(-1) / np.sqrt(d) for p in self.elements], axis=1)

    def resolve(self, m: np.ndarray, tol: float | None = None) -> tuple[int, complex]:
        """Identify m = phase * P_k; raises when m is not in the basis."""
        t = default_tol(tol)
        d = self.dim
        for k, p in enumerate(self.elements):
            c = np.trace(p.conj().T @ np.asarray(m)) / d
            if abs(abs(c) - 1.0) < max(t, 1e-7) and np.linalg.norm(m - c * p) < max(t, 1e-7) * d:
                return k, complex(c)
        raise NonGroupBasisError("matrix is not a unit-phase multiple of any basis element")

    def try_resolve(self, m: np.ndarray, tol: float | None = None):
        try:
            return self.resolve(m, tol)
        except NonGroupBasisError:
            return None

    def product_table(self):
        """(index, phase) tables for P_i P_j = phase * P_k, for group bases."""
        if self._product_cache is None:
            n = len(self.elements)
            idx = np.zeros((n, n), dtype=np.intp)
            ph = np.zeros((n, n), dtype=np.complex128)
            for i, j in itertools.product(range(n), range(n)):
                r = self.try_resolve(self.elements[i] @ self.elements[j])
                if r is None:
                    raise NonGroupBasisError("basis is not closed under multiplication")
                idx[i, j], ph[i, j] = r
            self._product_cache = (idx, ph)
        return self._product_cache

    def dagger_table(self):
        """(index, phase) with P_i† = phase * P_k."""
        if self._dagger_cache is None:
            pairs = [self.resolve(p.conj().T) for p in self.elements]
            self._dagger_cache = (
                np.array([k for k, _ in pairs], dtype=np.intp),
                np.array([c for _, c in pairs], dtype=np.complex128),
            )
        return self._dagger_cache

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "elements": [DenseTensor(p, ("row", "col")).to_json() for p in self.elements],
            "labels": list(self.labels),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MFBasis":
        elements = [DenseTensor.from_json(e).data for e in obj["elements"]]
        b = cls(obj["dim"], elements, labels=obj.get("labels"))
        b.cocycle = check_group_closure(b)
        b.is_group = b.cocycle is not None
        return b

    def __repr__(self) -> str:
        return f"MFBasis(dim={self.dim}, group={self.is_group})"


def shift_clock(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Generators X = sum |a+1><a| and Z = sum w^a |a><a| of dimension d."""
    x = np.roll(np.eye(d), 1, axis=0).astype(np.complex128)
    z = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    return x, z


def wh_label(v: int, w: int) -> str:
    if v == 0 and w == 0:
        return "I"
    parts = []
    if v:
        parts.append("X" if v == 1 else f"X^{v}")
    if w:
        parts.append("Z" if w == 1 else f"Z^{w}")
    return "".join(parts)


def weyl_heisenberg_basis(D: int) -> MFBasis:
    """The Weyl-Heisenberg group {X^v Z^w} with its exact cocycle.

    Element order is v*D + w, so the first D elements are the Z powers.
    """
    if D < 2:
        raise ValueError("D must be at least 2")
    x, z = shift_clock(D)
    elements, labels, vw = [], [], []
    for v in range(D):
        for w in range(D):
            elements.append(np.linalg.matrix_power(x, v) @ np.linalg.matrix_power(z, w))
            labels.append(wh_label(v, w))
            vw.append((v, w))
    n = D * D
    phases = np.empty((n, n), dtype=np.complex128)
    for j, (v, w) in enumerate(vw):
        for k, (vp, wp) in enumerate(vw):
            phases[j, k] = np.exp(2j * np.pi * (v * wp - w * vp) / D)
    basis = MFBasis(D, elements, labels=labels, is_group=True)
    basis.cocycle = CocycleTable(n, phases)
    return basis


def composite_basis(b1: MFBasis, b2: MFBasis, mode: str = "product") -> MFBasis:
    """Combine two bases for a composite local dimension d1*d2.

    ``product`` tensors two group bases elementwise.  ``mixed_clock`` takes
    Weyl-Heisenberg inputs and generates from X_{d1} x I, I x X_{d2}, and the
    full clock Z_{d1 d2}.
    """
    if mode == "product":
        if not (b1.is_group and b2.is_group):
            raise NonGroupBasisError("product mode requires two group bases")
        elements, labels = [], []
        for l1, p1 in zip(b1.labels, b1.elements):
            for l2, p2 in zip(b2.labels, b2.elements):
                elements.append(np.kron(p1, p2))
                labels.append(f"{l1}*{l2}")
        basis = MFBasis(b1.dim * b2.dim, elements, labels=labels)
    elif mode == "mixed_clock":
        for b in (b1, b2):
            x, _ = shift_clock(b.dim)
            if b.try_resolve(x) is None:
                raise BasisError("mixed_clock requires Weyl-Heisenberg inputs")
        d1, d2, d = b1.dim, b2.dim, b1.dim * b2.dim
        x1, _ = shift_clock(d1)
        x2, _ = shift_clock(d2)
        _, zd = shift_clock(d)
        gens = [np.kron(x1, np.eye(d2)), np.kron(np.eye(d1), x2), zd]
        elements = _generate_closure(gens, d * d)
        if elements is None:
            raise NonGroupBasisError(
                "mixed_clock generators do not close into d1^2 d2^2 distinct elements"
            )
        basis = MFBasis(d, elements)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    basis.cocycle = check_group_closure(basis)
    basis.is_group = basis.cocycle is not None
    return basis


def _generate_closure(gens: list[np.ndarray], limit: int) -> list[np.ndarray] | None:
    """Close a generating set under multiplication, modulo phase."""
    d = gens[0].shape[0]
    found: list[np.ndarray] = [np.eye(d, dtype=np.complex128)]

    def lookup(m):
        for q in found:
            c = np.trace(q.conj().T @ m) / d
            if abs(abs(c) - 1.0) < 1e-9 and np.linalg.norm(m - c * q) < 1e-9 * d:
                return True
        return False

    frontier = [np.eye(d, dtype=np.complex128)]
    while frontier:
        nxt = []
        for m in frontier:
            for g in gens:
                prod = g @ m
                if not lookup(prod):
                    found.append(prod)
                    nxt.append(prod)
                    if len(found) > limit:
                        return None
        frontier = nxt
    return found if len(found) == limit else None


def hadamard_latin_basis(H: list[np.ndarray], lam: np.ndarray) -> MFBasis:
    """Basis U_{ij}|k> = H^j_{ik} |lam(j,k)> from Hadamard matrices and a Latin square."""
    lam = np.asarray(lam, dtype=int)
    D = lam.shape[0]
    if lam.shape != (D, D):
        raise BasisError("Latin square must be D x D")
    for row in lam:
        if sorted(row.tolist()) != list(range(D)):
            raise BasisError("Latin square rows must be permutations of 0..D-1")
    for col in lam.T:
        if sorted(col.tolist()) != list(range(D)):
            raise BasisError("Latin square columns must be permutations of 0..D-1")
    if len(H) != D:
        raise BasisError("need one Hadamard matrix per row index j")
    for h in H:
        h = np.asarray(h)
        if h.shape != (D, D) or not np.allclose(np.abs(h), 1.0, atol=1e-9):
            raise BasisError("Hadamard entries must all have unit modulus")
        if np.linalg.norm(h @ h.conj().T - D * np.eye(D)) > 1e-7 * D:
            raise BasisError("H H† must equal D * identity")
    elements, labels = [], []
    for i in range(D):
        for j in range(D):
            u = np.zeros((D, D), dtype=np.complex128)
            for k in range(D):
                u[lam[j, k], k] = H[j][i, k]
            elements.append(u)
            labels.append(f"U[{i},{j}]")
    basis = MFBasis(D, elements, labels=labels)
    basis.cocycle = check_group_closure(basis)
    basis.is_group = basis.cocycle is not None
    return basis


def check_group_closure(b: MFBasis) -> CocycleTable | None:
    """Cocycle table when the basis closes under multiplication, else None."""
    n = len(b.elements)
    d = b.dim
    for i, j in itertools.product(range(n), range(n)):
        if b.try_resolve(b.elements[i] @ b.elements[j]) is None:
            return None
    phases = np.empty((n, n), dtype=np.complex128)
    for j, k in itertools.product(range(n), range(n)):
        pkj = b.elements[k] @ b.elements[j]
        pjk = b.elements[j] @ b.elements[k]
        # P_k P_j = omega(j,k) P_j P_k and both sides are unit-phase multiples
        # of the same basis element, so the ratio is read off directly.
        c = np.trace(pjk.conj().T @ pkj) / np.trace(pjk.conj().T @ pjk)
        phases[j, k] = c / abs(c)
    return CocycleTable(n, phases)


def fourier_matrix(D: int) -> np.ndarray:
    """DFT matrix scaled to the |entries| = 1 Hadamard convention."""
    a = np.arange(D)
    return np.exp(2j * np.pi * np.outer(a, a) / D)


def parse_basis_spec(spec) -> MFBasis:
    """Accept 'WH:D' shorthand or a JSON basis object."""
    if isinstance(spec, str):
        if spec.upper().startswith("WH:"):
            return weyl_heisenberg_basis(int(spec.split(":", 1)[1]))
        raise BasisError(f"unknown basis spec {spec!r}")
    return MFBasis.from_json(spec)
