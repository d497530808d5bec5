"""Monte-Carlo simulation of the measurement-and-feedback preparation protocol.

Chains and small PEPS patches are assembled from per-site resource tensors;
every bond is measured in the MF basis with exact Born-rule sampling (outcome
probabilities are computed from the actual resource state via sequential
conditionals, never assumed uniform), defects are pushed by the constraint
tables to the open boundary, and the corrected state is compared against the
directly contracted target.

Measuring a bond pair in the state |P_j> = sum_ab (P_j)_ab |a b> / sqrt(D)
inserts the matrix P_j^* / sqrt(D) on the bond, so the pushed defect class is
the class of P_j^*.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .basis import MFBasis
from .errors import (
    BoundaryError,
    DefectStuckError,
    DimensionMismatchError,
    NonGroupBasisError,
    SizeGuardError,
    SymmetryError,
)
from .mps import chain_state, check_mf_symmetry, complete_constraints
from .peps import PEPSTensor, slot_operator
from .tensors import DenseTensor, default_tol, procrustes_unitary, state_fidelity

RNG_ALGORITHM = "philox4x64"


@dataclass
class ProtocolRun:
    seed: int
    rng_algorithm: str
    outcomes: list
    probabilities: list
    corrections: list
    final_state: DenseTensor | None
    fidelity: float
    success: bool
    predicted_success: bool


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


# ---------------------------------------------------------------------------
# MPS chains
# ---------------------------------------------------------------------------


def _pair_transfer(mats) -> np.ndarray:
    """sum_i A^i x conj(A^i): (D^2, D^2) map from left pair to right pair."""
    return sum(np.kron(m, m.conj()) for m in mats)


def _chain_norm2(transfers, bond_ops, D: int, boundary: str) -> float:
    """Norm^2 of the chain with bond_ops[b] a ket matrix or None (unmeasured).

    Unmeasured bonds leave both layers' legs free, which disconnects the
    double-layer chain into independent segments.
    """
    delta = np.eye(D).reshape(-1)
    n = len(transfers)
    links = [None if op is None else np.kron(op, op.conj()) for op in bond_ops]
    if boundary == "open":
        total, v = 1.0, delta
        for k in range(n):
            v = v @ transfers[k]
            if k < n - 1:
                if links[k] is None:
                    total *= (v @ delta).real
                    v = delta
                else:
                    v = v @ links[k]
        return float(total * (v @ delta).real)
    if boundary == "periodic":
        cuts = [b for b, l in enumerate(links) if l is None]
        if not cuts:
            m = np.eye(D * D, dtype=np.complex128)
            for k in range(n):
                m = m @ transfers[k] @ links[k]
            return float(np.trace(m).real)
        total = 1.0
        for ci, cut in enumerate(cuts):
            start = (cut + 1) % n
            end = cuts[(ci + 1) % len(cuts)]
            v, k = delta, start
            while True:
                v = v @ transfers[k]
                if k == end:
                    break
                v = v @ links[k]
                k = (k + 1) % n
            total *= (v @ delta).real
        return float(total)
    raise BoundaryError(f"unknown boundary {boundary!r}")


def _validate_chain(tensors, tol: float) -> MFBasis:
    if not tensors:
        raise ValueError("empty chain")
    basis = tensors[0].basis
    for t in tensors:
        if t.basis.dim != basis.dim:
            raise DimensionMismatchError("all tensors must share the basis dimension")
        rep = check_mf_symmetry(t, tol)
        if not rep.passed:
            raise SymmetryError(f"chain tensor fails MF symmetry: {rep.max_residual:.3e}")
    if basis.try_resolve(basis.elements[0] @ basis.elements[0]) is None:
        raise NonGroupBasisError("protocol simulation requires a group basis")
    return basis


def _sample_chain_bonds(tensors, basis, boundary, rng):
    """Sequential exact Born sampling of all bond outcomes."""
    D = basis.dim
    transfers = [_pair_transfer(t.site_matrices()) for t in tensors]
    nbonds = len(tensors) if boundary == "periodic" else len(tensors) - 1
    bond_mats = [None] * nbonds
    outcomes, probs = [], []
    for b in range(nbonds):
        weights = []
        for j in range(len(basis.elements)):
            bond_mats[b] = basis.elements[j].conj() / np.sqrt(D)
            weights.append(_chain_norm2(transfers, bond_mats, D, boundary))
        weights = np.maximum(np.array(weights), 0.0)
        if weights.sum() <= 0:
            raise SymmetryError("projected chain has zero norm")
        p = weights / weights.sum()
        j = int(rng.choice(len(p), p=p))
        outcomes.append(j)
        probs.append(float(p[j]))
        bond_mats[b] = basis.elements[j].conj() / np.sqrt(D)
    return outcomes, probs, bond_mats


def _resolve_scaled(basis, m, tol):
    """(class, phase, scale) with m = scale * phase * P_class."""
    scale = np.linalg.norm(m) / np.sqrt(basis.dim)
    if scale <= 0:
        return None
    hit = basis.try_resolve(m / scale, tol)
    if hit is None:
        return None
    cls, phase = hit
    return cls, phase, scale


def _push_corrections(tensors, basis, outcomes, boundary, tol):
    """Left-to-right defect sweep; returns corrections, edge fix, predicted flag."""
    D = basis.dim
    n = len(tensors)
    nbonds = n if boundary == "periodic" else n - 1
    completed = [complete_constraints(t) for t in tensors]
    corrections = []
    carry = np.eye(D, dtype=np.complex128)
    predicted = True
    edge_fix = None
    for b in range(nbonds):
        combined = carry @ (basis.elements[outcomes[b]].conj() / np.sqrt(D))
        hit = _resolve_scaled(basis, combined, tol)
        if hit is None:
            raise DefectStuckError("bond operator left the basis", site=b)
        cls, phase, scale = hit
        if boundary == "periodic" and b == nbonds - 1:
            predicted = cls == basis.identity_index
            break
        site = b + 1
        if cls not in completed[site]:
            raise DefectStuckError(
                f"no constraint pushes {basis.labels[cls]} past site {site}",
                site=site,
                operator=basis.labels[cls],
            )
        u, out_cls = completed[site][cls]
        corrections.append((site, u))
        carry = (scale * phase) * basis.elements[out_cls]
    if boundary == "open":
        edge_fix = np.linalg.inv(carry)
    return corrections, edge_fix, predicted


def _chain_legs(tensors):
    return ("edge_left",) + tuple(f"phys{k}" for k in range(len(tensors))) + ("edge_right",)


def _apply_phys(state, u, site, boundary):
    axis = site + 1 if boundary == "open" else site
    return np.moveaxis(np.tensordot(u, state, axes=([1], [axis])), 0, axis)


def _corrected_chain_state(tensors, bond_mats, corrections, edge_fix, boundary):
    state = chain_state(tensors, bond_mats, boundary)
    for site, u in corrections:
        state = _apply_phys(state, u, site, boundary)
    if boundary == "open" and edge_fix is not None:
        state = np.tensordot(state, edge_fix, axes=([-1], [0]))
    return state


def run_mps_protocol(tensors, boundary: str = "open", seed: int = 0, tol: float | None = None) -> ProtocolRun:
    """Simulate one full MF preparation round for an MPS chain."""
    t = default_tol(tol)
    tensors = list(tensors)
    if boundary not in ("open", "periodic"):
        raise BoundaryError(f"unknown boundary {boundary!r}")
    basis = _validate_chain(tensors, t)
    rng = _rng(seed)
    if len(tensors) == 1 and boundary == "open":
        target = chain_state(tensors)
        return ProtocolRun(seed, RNG_ALGORITHM, [], [], [],
                           DenseTensor(target, _chain_legs(tensors)), 1.0, True, True)
    outcomes, probs, bond_mats = _sample_chain_bonds(tensors, basis, boundary, rng)
    corrections, edge_fix, predicted = _push_corrections(tensors, basis, outcomes, boundary, t)
    state = _corrected_chain_state(tensors, bond_mats, corrections, edge_fix, boundary)
    target = chain_state(tensors, None, boundary)
    fid = state_fidelity(state, target)
    legs = _chain_legs(tensors) if boundary == "open" else tuple(f"phys{k}" for k in range(len(tensors)))
    return ProtocolRun(seed, RNG_ALGORITHM, outcomes, probs, corrections,
                       DenseTensor(state, legs), fid, fid >= 1 - max(t, 1e-9), predicted)


@dataclass
class EnumerationReport:
    outcomes: list
    probabilities: list
    correctable: list
    fidelities: list
    success_probability: float

    @property
    def correctable_fraction(self) -> float:
        """Fraction of outcome tuples whose merged defect is correctable.

        This counts tuples, not probability weight: for periodic chains the
        projected branches have unequal norms, so the Born-honest
        success_probability can differ from this fraction.
        """
        if not self.correctable:
            return 1.0
        return sum(self.correctable) / len(self.correctable)


def enumerate_outcomes(tensors, boundary: str = "open", tol: float | None = None) -> EnumerationReport:
    """Exhaustive exact accounting over all measurement outcome tuples."""
    t = default_tol(tol)
    tensors = list(tensors)
    basis = _validate_chain(tensors, t)
    D = basis.dim
    nbonds = len(tensors) if boundary == "periodic" else len(tensors) - 1
    if (D * D) ** nbonds > 65536:
        raise SizeGuardError("outcome enumeration exceeds the desk-scale guard")
    transfers = [_pair_transfer(x.site_matrices()) for x in tensors]
    norm_free = _chain_norm2(transfers, [None] * nbonds, D, boundary)
    target = chain_state(tensors, None, boundary)
    outs, probs, correctable, fids = [], [], [], []
    success_p = 0.0
    for combo in itertools.product(range(D * D), repeat=nbonds):
        bond_mats = [basis.elements[j].conj() / np.sqrt(D) for j in combo]
        p = _chain_norm2(transfers, bond_mats, D, boundary) / norm_free
        try:
            corrections, edge_fix, predicted = _push_corrections(tensors, basis, list(combo), boundary, t)
        except DefectStuckError:
            predicted, corrections, edge_fix = False, [], None
        state = _corrected_chain_state(tensors, bond_mats, corrections, edge_fix, boundary)
        fid = state_fidelity(state, target)
        outs.append(combo)
        probs.append(float(p))
        correctable.append(bool(predicted))
        fids.append(float(fid))
        if predicted:
            success_p += p
    return EnumerationReport(outs, probs, correctable, fids, float(success_p))


# ---------------------------------------------------------------------------
# PEPS patches
# ---------------------------------------------------------------------------

# orientation -> (in slots, out slots) over legs (left, up, right, down) = 0..3
ORIENTATIONS = {
    "ur": ((0, 3), (1, 2)),
    "ul": ((2, 3), (1, 0)),
    "dr": ((0, 1), (3, 2)),
    "dl": ((2, 1), (3, 0)),
}


def solve_push_table(A: PEPSTensor, in_slot: int, out_slots, tol: float | None = None):
    """Per-class push rules U B (P on in_slot) = B (P1 on out1)(P2 on out2)."""
    t = max(default_tol(tol), 1e-8)
    basis = A.basis
    b = A.as_matrix()
    scale = max(np.linalg.norm(b), 1e-300)
    n = len(basis.elements)
    ident = basis.identity_index
    pair_order = sorted(
        itertools.product(range(n), range(n)),
        key=lambda p: (p[0] != ident) + (p[1] != ident),
    )
    table = {}
    for cls in range(n):
        lhs = b @ slot_operator(basis, in_slot, basis.elements[cls])
        for c1, c2 in pair_order:
            rhs = (
                b
                @ slot_operator(basis, out_slots[0], basis.elements[c1])
                @ slot_operator(basis, out_slots[1], basis.elements[c2])
            )
            u = procrustes_unitary(rhs, lhs)
            if np.linalg.norm(u @ lhs - rhs) / scale < t:
                table[cls] = (u, c1, c2)
                break
        if cls not in table:
            raise DefectStuckError(
                f"tensor admits no push for {basis.labels[cls]} on slot {in_slot}",
                operator=basis.labels[cls],
            )
    return table


class PepsPatch:
    """A rows x cols grid with per-site drain orientations.

    Horizontal bond ("h", r, c) joins sites (r, c)-(r, c+1) with the west
    site carrying the first bond index; vertical bond ("v", r, c) joins
    (r+1, c)-(r, c) with the south site first.  Row 0 is the top row.
    """

    def __init__(self, grid, orientations="ur", tol: float | None = None):
        self.grid = [list(row) for row in grid]
        self.rows = len(self.grid)
        self.cols = len(self.grid[0])
        self.tol = default_tol(tol)
        basis = self.grid[0][0].basis
        for row in self.grid:
            for a in row:
                if a.basis.dim != basis.dim:
                    raise DimensionMismatchError("grid tensors must share the basis")
        self.basis = basis
        self.D = basis.dim
        if isinstance(orientations, str):
            orientations = [[orientations] * self.cols for _ in range(self.rows)]
        self.orient = [list(row) for row in orientations]
        for row in self.orient:
            for o in row:
                if o not in ORIENTATIONS:
                    raise ValueError(f"unknown orientation {o!r}")
        self._tables: dict = {}

    def bonds(self):
        hs = [("h", r, c) for r in range(self.rows) for c in range(self.cols - 1)]
        vs = [("v", r, c) for r in range(self.rows - 1) for c in range(self.cols)]
        return hs + vs

    def site_bond_slots(self, r, c):
        return {
            0: ("h", r, c - 1) if c > 0 else None,
            2: ("h", r, c) if c < self.cols - 1 else None,
            1: ("v", r - 1, c) if r > 0 else None,
            3: ("v", r, c) if r < self.rows - 1 else None,
        }

    def push_table(self, r, c, in_slot):
        key = (id(self.grid[r][c]), in_slot, ORIENTATIONS[self.orient[r][c]][1])
        if key not in self._tables:
            self._tables[key] = solve_push_table(
                self.grid[r][c], in_slot, ORIENTATIONS[self.orient[r][c]][1], self.tol
            )
        return self._tables[key]

    def processing_order(self):
        """Topological order of the defect-emission graph (Kahn)."""
        deps = {(r, c): set() for r in range(self.rows) for c in range(self.cols)}
        for r in range(self.rows):
            for c in range(self.cols):
                slots = self.site_bond_slots(r, c)
                for out_slot in ORIENTATIONS[self.orient[r][c]][1]:
                    bond = slots[out_slot]
                    if bond is None:
                        continue
                    other = self._other_site(bond, (r, c))
                    in_slots = ORIENTATIONS[self.orient[other[0]][other[1]]][0]
                    other_slot = self._slot_of(bond, other)
                    if other_slot in in_slots:
                        deps[other].add((r, c))
        order, ready = [], [s for s, d in deps.items() if not d]
        done = set()
        while ready:
            s = ready.pop()
            order.append(s)
            done.add(s)
            for t_site, d in deps.items():
                if t_site not in done and t_site not in ready and d <= done:
                    ready.append(t_site)
        if len(order) != self.rows * self.cols:
            raise DefectStuckError("orientation assignment has a cyclic defect flow")
        return order

    def _other_site(self, bond, site):
        kind, r, c = bond
        if kind == "h":
            return (r, c + 1) if site == (r, c) else (r, c)
        return (r, c) if site == (r + 1, c) else (r + 1, c)

    def _slot_of(self, bond, site):
        kind, r, c = bond
        if kind == "h":
            return 2 if site == (r, c) else 0
        return 1 if site == (r, c) else 3

    # -- double-layer contraction ------------------------------------------

    def network_value(self, ket_mods=None, bra_mods=None, ket_bonds=None, bra_bonds=None, cuts=frozenset()):
        """<bra|ket> with per-site phys/leg ops, bond matrices, and cut bonds.

        ``*_mods`` maps (r, c) to (u_phys | None, [(slot, matrix), ...]);
        ``*_bonds`` maps bond keys to ket/bra matrices; bonds in ``cuts`` are
        unmeasured: each layer's legs are traced separately.
        """
        ket_mods = ket_mods or {}
        bra_mods = bra_mods or {}
        ket_bonds = ket_bonds or {}
        bra_bonds = bra_bonds or {}
        D = self.D
        letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
        it = iter(letters)
        sides = {key: (next(it), next(it)) for key in self.bonds() if key not in cuts}
        operands, scripts = [], []
        for r in range(self.rows):
            for c in range(self.cols):
                ket = self._site_array(r, c, ket_mods.get((r, c)))
                bra = self._site_array(r, c, bra_mods.get((r, c)))
                slots = self.site_bond_slots(r, c)
                live = [s for s in range(4) if slots[s] is not None and slots[s] not in cuts]
                arr = _fold_site(ket, bra, live, D)
                labels = ""
                for s in live:
                    key = slots[s]
                    first = self._first_side(key) == (r, c)
                    labels += sides[key][0 if first else 1]
                operands.append(arr)
                scripts.append(labels)
        for key, (a, b) in sides.items():
            mk = ket_bonds.get(key)
            mb = bra_bonds.get(key)
            mk = np.eye(D) if mk is None else mk
            mb = np.eye(D) if mb is None else mb
            operands.append(np.kron(mk, mb.conj()))
            scripts.append(a + b)
        return complex(np.einsum(",".join(scripts) + "->", *operands, optimize=True))

    def _first_side(self, bond):
        kind, r, c = bond
        return (r, c) if kind == "h" else (r + 1, c)

    def _site_array(self, r, c, mods):
        arr = self.grid[r][c].tensor.transpose_to(("left", "up", "right", "down", "phys")).data
        if mods is None:
            return arr
        u_phys, slot_ops = mods
        if u_phys is not None:
            arr = np.tensordot(arr, np.asarray(u_phys).T, axes=([4], [0]))
        for slot, m in slot_ops:
            arr = np.moveaxis(np.tensordot(arr, m, axes=([slot], [0])), -1, slot)
        return arr

    def dense_state(self, ket_mods=None, ket_bonds=None, max_size: int = 1 << 22):
        """Dense contraction of the ket layer, or None beyond ``max_size``.

        Output legs: per site in raster order, the boundary virtual legs (in
        left/up/right/down order) followed by the physical leg.
        """
        ket_mods = ket_mods or {}
        ket_bonds = ket_bonds or {}
        letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
        it = iter(letters)
        side_letter = {}
        operands, scripts = [], []
        for key in self.bonds():
            m = ket_bonds.get(key)
            if m is None:
                l = next(it)
                side_letter[(key, True)] = side_letter[(key, False)] = l
            else:
                l1, l2 = next(it), next(it)
                side_letter[(key, True)] = l1
                side_letter[(key, False)] = l2
                operands.append(np.asarray(m))
                scripts.append(l1 + l2)
        out, out_legs, size = "", [], 1
        slot_names = ("left", "up", "right", "down")
        for r in range(self.rows):
            for c in range(self.cols):
                arr = self._site_array(r, c, ket_mods.get((r, c)))
                slots = self.site_bond_slots(r, c)
                label = ""
                for s in range(4):
                    if slots[s] is None:
                        l = next(it)
                        label += l
                        out += l
                        out_legs.append(f"{slot_names[s]}_{r}_{c}")
                        size *= self.D
                    else:
                        label += side_letter[(slots[s], self._first_side(slots[s]) == (r, c))]
                p = next(it)
                label += p
                out += p
                out_legs.append(f"phys_{r}_{c}")
                size *= arr.shape[4]
                operands.append(arr)
                scripts.append(label)
        if size > max_size:
            return None
        data = np.einsum(",".join(scripts) + "->" + out, *operands, optimize=True)
        return DenseTensor(data, out_legs)


def _fold_site(ket, bra, live, D):
    """Double tensor over a site with merged (ket, bra) pair legs on live bonds."""
    kl = "abcd"
    bl = "ABCD"
    ket_spec = kl + "p"
    bra_spec = "".join(bl[s] if s in live else kl[s] for s in range(4)) + "p"
    out_spec = "".join(kl[s] + bl[s] for s in live)
    arr = np.einsum(f"{ket_spec},{bra_spec}->{out_spec}", ket, bra.conj())
    return arr.reshape((D * D,) * len(live))


def _route_defects(patch: PepsPatch, outcomes: dict, tol: float):
    """Symbolic defect sweep.  Returns per-site unitaries and boundary fixes.

    ``outcomes`` maps bond keys to measured basis indices.  Pending bond
    matrices are tracked in [first-side, second-side] index order; receiving
    on the first (west/south) side uses the matrix directly, on the second
    (east/north) side its transpose.  Emissions compose exactly, so the
    recorded corrections transform the measured network into the target one.
    """
    basis = patch.basis
    D = patch.D
    pend = {
        key: basis.elements[j].conj() / np.sqrt(D) for key, j in outcomes.items()
    }
    consumed = {key: False for key in pend}
    site_u = {}
    edge_ops = {}
    ident = basis.identity_index

    def emit(site, slot, cls, phase):
        if cls == ident and abs(phase - 1.0) < 1e-12:
            return
        g = phase * basis.elements[cls]
        bond = patch.site_bond_slots(*site)[slot]
        if bond is None:
            r, c = site
            prev = edge_ops.get((r, c, slot), np.eye(D, dtype=np.complex128))
            edge_ops[(r, c, slot)] = prev @ g
            return
        if consumed[bond]:
            raise DefectStuckError("emission into an already corrected bond", site=site)
        if patch._first_side(bond) == site:
            pend[bond] = g @ pend[bond]
        else:
            pend[bond] = pend[bond] @ g.T

    for site in patch.processing_order():
        r, c = site
        ins, outs = ORIENTATIONS[patch.orient[r][c]]
        slots = patch.site_bond_slots(r, c)
        for in_slot in ins:
            bond = slots[in_slot]
            if bond is None or consumed[bond]:
                continue
            consumed[bond] = True
            m = pend[bond] if patch._first_side(bond) == site else pend[bond].T
            hit = _resolve_scaled(basis, m, tol)
            if hit is None:
                raise DefectStuckError("bond operator left the basis", site=site)
            cls, phase, _ = hit
            if cls == ident:
                continue
            table = patch.push_table(r, c, in_slot)
            u, c1, c2 = table[cls]
            prev = site_u.get(site, np.eye(patch.grid[r][c].d, dtype=np.complex128))
            site_u[site] = prev @ u
            emit(site, outs[0], c1, phase)
            emit(site, outs[1], c2, 1.0)

    for key, flag in consumed.items():
        if flag:
            continue
        hit = _resolve_scaled(basis, pend[key], tol)
        if hit is None or hit[0] != ident:
            raise DefectStuckError("unconsumed non-identity defect", site=key)
    return site_u, edge_ops


def _ket_mods(patch: PepsPatch, site_u, edge_ops):
    mods = {}
    for (r, c), u in site_u.items():
        mods[(r, c)] = [u, []]
    for (r, c, slot), g in edge_ops.items():
        mods.setdefault((r, c), [None, []])
        mods[(r, c)][1].append((slot, np.linalg.inv(g)))
    return {k: (v[0], v[1]) for k, v in mods.items()}


def _sample_peps_bonds(patch: PepsPatch, rng):
    basis = patch.basis
    D = patch.D
    order = patch.bonds()
    chosen: dict = {}
    probs = []
    for key in order:
        remaining = frozenset(k for k in order if k not in chosen and k != key)
        weights = []
        for j in range(len(basis.elements)):
            mats = {k: basis.elements[v].conj() / np.sqrt(D) for k, v in chosen.items()}
            mats[key] = basis.elements[j].conj() / np.sqrt(D)
            val = patch.network_value(ket_bonds=mats, bra_bonds=mats, cuts=remaining)
            weights.append(max(val.real, 0.0))
        weights = np.array(weights)
        if weights.sum() <= 0:
            raise SymmetryError("projected patch has zero norm")
        p = weights / weights.sum()
        j = int(rng.choice(len(p), p=p))
        chosen[key] = j
        probs.append(float(p[j]))
    return chosen, probs


def peps_fidelity(patch: PepsPatch, outcomes: dict, site_u, edge_ops) -> float:
    """Overlap fidelity of the corrected network against the clean target."""
    D = patch.D
    basis = patch.basis
    mats = {k: basis.elements[j].conj() / np.sqrt(D) for k, j in outcomes.items()}
    mods = _ket_mods(patch, site_u, edge_ops)
    tc = patch.network_value(ket_mods=mods, ket_bonds=mats)
    cc = patch.network_value(ket_mods=mods, bra_mods=mods, ket_bonds=mats, bra_bonds=mats)
    tt = patch.network_value()
    denom = tt.real * cc.real
    if denom <= 0:
        return 0.0
    return float(abs(tc) ** 2 / denom)


def run_peps_protocol(grid, orientation="ur", seed: int = 0, tol: float | None = None) -> ProtocolRun:
    """Simulate one MF preparation round for a small PEPS patch.

    ``orientation`` is a single drain direction or a per-site grid of
    directions from {ur, ul, dr, dl}; regions must drain consistently.
    """
    t = default_tol(tol)
    patch = grid if isinstance(grid, PepsPatch) else PepsPatch(grid, orientation, t)
    if patch.rows * patch.cols > 9:
        raise SizeGuardError("patch exceeds the 3 x 3 desk-scale guard")
    rng = _rng(seed)
    if not patch.bonds():
        state = patch.dense_state()
        return ProtocolRun(seed, RNG_ALGORITHM, [], [], [], state, 1.0, True, True)
    outcomes, probs = _sample_peps_bonds(patch, rng)
    site_u, edge_ops = _route_defects(patch, outcomes, t)
    fid = peps_fidelity(patch, outcomes, site_u, edge_ops)
    mats = {k: patch.basis.elements[j].conj() / np.sqrt(patch.D) for k, j in outcomes.items()}
    state = patch.dense_state(ket_mods=_ket_mods(patch, site_u, edge_ops), ket_bonds=mats)
    corrections = [(site, u) for site, u in sorted(site_u.items())]
    return ProtocolRun(
        seed,
        RNG_ALGORITHM,
        [outcomes[k] for k in patch.bonds()],
        probs,
        corrections,
        state,
        fid,
        fid >= 1 - max(t, 1e-9),
        True,
    )


def peps_routing_complete(patch: PepsPatch) -> bool:
    """Verify every defect class is pushable at every site and in-slot.

    Corrections for simultaneous defects compose exactly, so completeness of
    the per-class tables implies every outcome tuple is correctable.
    """
    for r in range(patch.rows):
        for c in range(patch.cols):
            for in_slot in ORIENTATIONS[patch.orient[r][c]][0]:
                patch.push_table(r, c, in_slot)
    patch.processing_order()
    return True


def enumerate_peps_outcomes(patch: PepsPatch, tol: float | None = None, fidelity_limit: int | None = None):
    """Exhaustive accounting over all PEPS outcome tuples (small patches).

    Returns an EnumerationReport; ``fidelity_limit`` caps how many outcome
    tuples get the (more expensive) fidelity contraction, None meaning all.
    """
    t = default_tol(tol)
    order = patch.bonds()
    n = len(patch.basis.elements)
    if n ** len(order) > 65536:
        raise SizeGuardError("outcome enumeration exceeds the desk-scale guard")
    norm_free = patch.network_value(cuts=frozenset(order)).real
    outs, probs, correctable, fids = [], [], [], []
    success_p = 0.0
    for combo in itertools.product(range(n), repeat=len(order)):
        outcomes = dict(zip(order, combo))
        mats = {k: patch.basis.elements[j].conj() / np.sqrt(patch.D) for k, j in outcomes.items()}
        p = patch.network_value(ket_bonds=mats, bra_bonds=mats).real / norm_free
        try:
            site_u, edge_ops = _route_defects(patch, outcomes, t)
            ok = True
        except DefectStuckError:
            ok, site_u, edge_ops = False, {}, {}
        fid = None
        if ok and (fidelity_limit is None or len(fids) < fidelity_limit):
            fid = peps_fidelity(patch, outcomes, site_u, edge_ops)
        outs.append(combo)
        probs.append(float(p))
        correctable.append(ok)
        fids.append(fid)
        if ok:
            success_p += p
    return EnumerationReport(outs, probs, correctable, fids, float(success_p))
