"""MPO tensors implementable via measurement and feedback.

An MPO tensor O with legs (left, right, phys_in, phys_out) satisfies the
isometry condition sum_{o,l,r} O^{(o,a)}_{lr} conj(O^{(o,b)}_{lr}) = D d_ab
and, slice by slice in the input index a, the same push-through symmetry as
an MF MPS with the correction acting on phys_out:

    sum_j (U_P)_{oj} P A_a^j = A_a^o P',   A_a^o := O^{(o,a)} as (left, right).

The slices V_a: l -> (o, r) are then orthonormal isometries, the purifying
unitary U(|a> x |l>) = V_a|l> is unitary on C^{d D}, and two MPOs with the
same (complete) constraints differ by a local unitary on the input leg:
U† U' = U_tilde x I_D exactly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import (
    BoundaryError,
    DimensionMismatchError,
    SizeGuardError,
    SymmetryError,
)
from .mps import MPSTensor, check_mf_symmetry, complete_constraints
from .protocol import RNG_ALGORITHM, ProtocolRun, _resolve_scaled, _rng
from .tensors import DenseTensor, default_tol, proportionality, state_fidelity

MPO_LEGS = ("left", "right", "phys_in", "phys_out")


class MPOTensor:
    """An MPO tensor bound to an MF basis and per-slice constraints."""

    def __init__(self, tensor: DenseTensor, basis, constraints=()):
        if set(tensor.legs) != set(MPO_LEGS):
            raise DimensionMismatchError("MPO tensor needs legs left/right/phys_in/phys_out")
        if tensor.leg_dim("left") != basis.dim or tensor.leg_dim("right") != basis.dim:
            raise DimensionMismatchError("virtual legs must match the basis dimension")
        if tensor.leg_dim("phys_in") != tensor.leg_dim("phys_out"):
            raise DimensionMismatchError("phys_in and phys_out must have equal dimension")
        self.tensor = tensor
        self.basis = basis
        self.constraints = list(constraints)

    @property
    def d(self) -> int:
        return self.tensor.leg_dim("phys_in")

    @property
    def D(self) -> int:
        return self.basis.dim

    def array(self) -> np.ndarray:
        """O[o, a, l, r] with o = phys_out, a = phys_in."""
        return self.tensor.transpose_to(("phys_out", "phys_in", "left", "right")).data

    @classmethod
    def from_array(cls, arr, basis, constraints=()) -> "MPOTensor":
        t = DenseTensor(np.asarray(arr, dtype=np.complex128),
                        ("phys_out", "phys_in", "left", "right"))
        return cls(t.transpose_to(MPO_LEGS), basis, constraints)

    def slice_tensor(self, a: int) -> MPSTensor:
        """Slice at phys_in = a as an MPS tensor (phys = phys_out)."""
        return MPSTensor(
            DenseTensor(self.array()[:, a], ("phys", "left", "right")),
            self.basis,
            self.constraints,
        )

    def apply_phys_in(self, u: np.ndarray) -> "MPOTensor":
        """O composed with a local unitary acting first on the input leg.

        Input-leg mixing preserves the per-slice constraints.
        """
        arr = np.einsum("oalr,ab->oblr", self.array(), np.asarray(u))
        return MPOTensor.from_array(arr, self.basis, self.constraints)


def check_mpo_isometry(O: MPOTensor, tol: float | None = None):
    """Contracting O against O† over phys_out and both virtual legs must give
    D * delta on the phys_in pair.  Returns (pass, constant, residual)."""
    arr = O.array()
    gram = np.einsum("oalr,oblr->ab", arr, arr.conj())
    const, resid = proportionality(gram, np.eye(O.d))
    t = default_tol(tol)
    ok = resid < t and abs(const - O.D) < max(t, 1e-9) * max(O.D, 1)
    return ok, complex(const), float(resid)


def check_mpo_symmetry(O: MPOTensor, tol: float | None = None) -> float:
    """Worst push-through residual over all input slices."""
    return max(
        (r for a in range(O.d) for r in check_mf_symmetry(O.slice_tensor(a), tol).residuals),
        default=0.0,
    )


@dataclass
class SliceReport:
    slices: list
    isometry_residuals: list
    orthogonality_residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return (
            max(self.isometry_residuals, default=0.0) < self.tol
            and self.orthogonality_residual < self.tol
        )


def mpo_slices(O: MPOTensor, tol: float | None = None) -> SliceReport:
    """Slices V_a: C^D -> C^{dD} with their isometry and orthogonality checks.

    Orthogonality is sum_o A_a^o A_b^{o†} = delta_ab I_D; the precondition is
    the isometry condition together with the slice symmetry.
    """
    t = default_tol(tol)
    ok, _, resid = check_mpo_isometry(O, t)
    if not ok:
        raise SymmetryError(f"MPO isometry condition fails with residual {resid:.3e}")
    sym = check_mpo_symmetry(O, t)
    if sym >= max(t, 1e-9):
        raise SymmetryError(f"MPO slice symmetry fails with residual {sym:.3e}")
    arr = O.array()
    D, d = O.D, O.d
    slices = [
        np.ascontiguousarray(arr[:, a].transpose(0, 2, 1).reshape(d * D, D)) for a in range(d)
    ]  # rows (o, r), cols l
    iso = [float(np.linalg.norm(v.conj().T @ v - np.eye(D))) for v in slices]
    pair = np.einsum("oalr,obmr->ablm", arr, arr.conj())
    want = np.einsum("ab,lm->ablm", np.eye(d), np.eye(D))
    return SliceReport(slices, iso, float(np.linalg.norm(pair - want)), t)


def build_purifying_unitary(O: MPOTensor, tol: float | None = None) -> DenseTensor:
    """U on C^{d D} with U(|a> x |l>) = V_a |l>; columns indexed by (a, l).

    Unitarity is equivalent to slice orthogonality; every push-through
    constraint lifts to U (I_d x P) = (U_P† x P') U and is re-verified.
    """
    t = default_tol(tol)
    report = mpo_slices(O, t)
    if not report.passed:
        raise SymmetryError("slice orthogonality fails; purification is not unitary")
    d, D = O.d, O.D
    u = np.zeros((d * D, d * D), dtype=np.complex128)
    for a, v in enumerate(report.slices):
        u[:, a * D : (a + 1) * D] = v
    if np.linalg.norm(u @ u.conj().T - np.eye(d * D)) > max(t, 1e-9) * d * D:
        raise SymmetryError("assembled purification is not unitary")
    for c in O.constraints:
        p = O.basis.elements[c.p_in]
        pp = O.basis.elements[c.p_out]
        # the slice symmetry lifts to U (I_d x P^T) = (U_P† x P'^T) U
        lhs = u @ np.kron(np.eye(d), p.T)
        rhs = np.kron(c.u_phys.conj().T, pp.T) @ u
        if np.linalg.norm(lhs - rhs) > max(t, 1e-8) * np.linalg.norm(u):
            raise SymmetryError("purifying unitary violates a push-through constraint")
    return DenseTensor(u, ("out", "in"))


def relative_local_unitary(O: MPOTensor, O2: MPOTensor, tol: float | None = None) -> np.ndarray:
    """The d x d unitary with O2 = O composed with U_tilde on phys_in.

    Both MPOs must pass the slice checks with identical constraints; U† U'
    then factors exactly as U_tilde x I_D on the (phys_in, left) input space.
    The result is phase-fixed by making its leading entry real positive.
    """
    t = default_tol(tol)
    if O.basis.dim != O2.basis.dim or O.d != O2.d:
        raise DimensionMismatchError("MPOs act on different spaces")
    same = len(O.constraints) == len(O2.constraints) and all(
        c1.p_in == c2.p_in
        and c1.p_out == c2.p_out
        and np.allclose(c1.u_phys, c2.u_phys, atol=1e-9)
        for c1, c2 in zip(O.constraints, O2.constraints)
    )
    if not same:
        raise SymmetryError("relative unitary requires identical constraint sets")
    u = build_purifying_unitary(O, t).data
    u2 = build_purifying_unitary(O2, t).data
    w = (u.conj().T @ u2).reshape(O.d, O.D, O.d, O.D)
    ut = np.einsum("arbr->ab", w) / O.D
    resid = float(np.linalg.norm(w.reshape(O.d * O.D, -1) - np.kron(ut, np.eye(O.D))))
    if resid > max(t, 1e-8) * np.sqrt(O.d * O.D):
        raise SymmetryError(
            f"U†U' does not factor as U_tilde x I_D (residual {resid:.3e})"
        )
    flat = ut.reshape(-1)
    lead = next(x for x in flat if abs(x) > 1e-9)  # first-nonzero-entry-positive
    ut = ut * (abs(lead) / lead)
    _, back_resid = proportionality(
        O2.array().reshape(-1), O.apply_phys_in(ut).array().reshape(-1)
    )
    if back_resid > max(t, 1e-8):
        raise SymmetryError("recovered local unitary does not reproduce the second MPO")
    return ut


# ---------------------------------------------------------------------------
# protocol application
# ---------------------------------------------------------------------------


def direct_mpo_state(tensors, input_state) -> np.ndarray:
    """Direct contraction of the MPO chain applied to the input.

    Output axes: (edge_left, o_1, ..., o_n, edge_right).
    """
    tensors = list(tensors)
    n = len(tensors)
    d = tensors[0].d
    psi = np.asarray(input_state, dtype=np.complex128).reshape([d] * n)
    cur = np.tensordot(tensors[0].array(), psi, axes=([1], [0]))  # (o1, l, r1, a2..)
    cur = np.moveaxis(cur, 1, 0)  # (l, o1, r1, a2..an)
    for k in range(1, n):
        arr = tensors[k].array()
        # contract bond r_k (axis 1+k) and input a_{k+1} (axis 2+k)
        cur = np.tensordot(cur, arr, axes=([1 + k, 2 + k], [2, 1]))
        cur = np.moveaxis(cur, [-2, -1], [1 + k, 2 + k])
    return cur


def apply_mpo_via_protocol(tensors, input_state, boundary: str = "open", seed: int = 0,
                           tol: float | None = None) -> ProtocolRun:
    """Apply a chain of MPO tensors to an input state through one MF round.

    Each site isometry |a> -> sum_{l,o,r} O^{(o,a)}_{lr} |l,o,r>/sqrt(D) is
    applied, interior bonds are Born-sampled as soon as both halves exist,
    defects are pushed right via phys_out corrections, and the final defect is
    cancelled on the right edge leg.  The result lives on
    (edge_left, phys_out^n, edge_right) and is compared with the direct
    contraction; periodic chains are deliberately not sampled (post-selected
    accounting only, see ``periodic_mpo_accounting``).
    """
    t = default_tol(tol)
    if boundary != "open":
        raise BoundaryError("protocol application supports open boundaries only")
    tensors = list(tensors)
    n = len(tensors)
    if n == 0:
        raise ValueError("empty chain")
    if n > 6:
        raise SizeGuardError("MPO protocol chains are capped at 6 sites")
    basis = tensors[0].basis
    D, d = basis.dim, tensors[0].d
    for o in tensors:
        if o.basis.dim != D or o.d != d:
            raise DimensionMismatchError("chain tensors must share dimensions")
        if check_mpo_symmetry(o, t) >= max(t, 1e-9):
            raise SymmetryError("chain tensor fails the MPO push-through symmetry")
    psi = np.asarray(input_state, dtype=np.complex128).reshape([d] * n)
    rng = _rng(seed)

    state = np.tensordot(tensors[0].array() / np.sqrt(D), psi, axes=([1], [0]))
    state = np.moveaxis(state, 1, 0)  # (l, o1, r1, a2..an)
    outcomes, probs = [], []
    for k in range(1, n):
        arr = tensors[k].array() / np.sqrt(D)
        # state axes: (l, o_0..o_{k-1}, r_{k-1}, a_k..a_{n-1}); absorb a_k
        cur = np.tensordot(state, arr, axes=([k + 2], [1]))
        # cur axes: (l, o_0..o_{k-1}, r_{k-1}, a_{k+1}.., o_k, l_k, r_k)
        weights, branches = [], []
        for j in range(len(basis.elements)):
            g = basis.elements[j].conj() / np.sqrt(D)
            branch = np.tensordot(cur, g, axes=([1 + k, cur.ndim - 2], [0, 1]))
            branches.append(branch)
            weights.append(float(np.vdot(branch, branch).real))
        weights = np.maximum(np.array(weights), 0.0)
        if weights.sum() <= 0:
            raise SymmetryError("projected chain has zero norm")
        p = weights / weights.sum()
        j = int(rng.choice(len(p), p=p))
        outcomes.append(j)
        probs.append(float(p[j]))
        picked = branches[j]
        # axes now: (l, o_1..o_k, a_{k+2}.., o_{k+1}, r_{k+1})
        state = np.moveaxis(picked, [-2, -1], [1 + k, 2 + k])

    corrections = []
    carry = np.eye(D, dtype=np.complex128)
    completed = [complete_constraints(o.slice_tensor(0)) for o in tensors]
    for b in range(n - 1):
        combined = carry @ (basis.elements[outcomes[b]].conj() / np.sqrt(D))
        hit = _resolve_scaled(basis, combined, t)
        if hit is None:
            raise SymmetryError("bond operator left the basis")
        cls, phase, scale = hit
        site = b + 1
        if cls not in completed[site]:
            from .errors import DefectStuckError

            raise DefectStuckError(
                f"no constraint pushes {basis.labels[cls]} past site {site}",
                site=site,
                operator=basis.labels[cls],
            )
        u, out_cls = completed[site][cls]
        corrections.append((site, u))
        state = np.moveaxis(np.tensordot(u, state, axes=([1], [1 + site])), 0, 1 + site)
        carry = (scale * phase) * basis.elements[out_cls]
    state = np.tensordot(state, np.linalg.inv(carry), axes=([-1], [0]))

    target = direct_mpo_state(tensors, input_state)
    fid = state_fidelity(state, target)
    legs = ("edge_left",) + tuple(f"out{k}" for k in range(n)) + ("edge_right",)
    return ProtocolRun(seed, RNG_ALGORITHM, outcomes, probs, corrections,
                       DenseTensor(state, legs), fid, fid >= 1 - max(t, 1e-9), True)


@dataclass
class PeriodicMpoReport:
    outcomes: list
    probabilities: list
    post_selected: list
    fidelities: list
    success_probability: float


def periodic_mpo_accounting(tensors, input_state, tol: float | None = None) -> PeriodicMpoReport:
    """Exact post-selection accounting for periodic MPO application.

    Periodic chains cannot be corrected deterministically; this enumerates
    every outcome tuple, reports its exact Born weight, and verifies that the
    post-selected branches (merged defect proportional to the identity)
    reproduce the direct periodic MPO action.  No sampling is performed.
    """
    t = default_tol(tol)
    tensors = list(tensors)
    n = len(tensors)
    basis = tensors[0].basis
    D, d = basis.dim, tensors[0].d
    if (D * D) ** n > 4096:
        raise SizeGuardError("periodic accounting exceeds the desk-scale guard")
    psi = np.asarray(input_state, dtype=np.complex128).reshape([d] * n)

    # target: periodic MPO action, virtual legs traced
    open_target = direct_mpo_state(tensors, input_state)
    target = np.trace(open_target, axis1=0, axis2=open_target.ndim - 1)

    slices = [o.array() for o in tensors]
    completed = [complete_constraints(o.slice_tensor(0)) for o in tensors]
    outs, weights, kept, branches = [], [], [], []
    for combo in itertools.product(range(D * D), repeat=n):
        mats = [basis.elements[j].conj() / np.sqrt(D) for j in combo]
        cur = np.tensordot(slices[0] / np.sqrt(D), psi, axes=([1], [0]))
        cur = np.moveaxis(cur, 1, 0)  # (l, o_0, r_0, a_1..)
        for k in range(1, n):
            cur = np.einsum("...r,rs->...s", np.moveaxis(cur, 1 + k, -1), mats[k - 1])
            cur = np.moveaxis(cur, -1, 1 + k)
            cur = np.tensordot(cur, slices[k] / np.sqrt(D), axes=([1 + k, 2 + k], [2, 1]))
            cur = np.moveaxis(cur, [-2, -1], [1 + k, 2 + k])
        cur = np.einsum("...r,rs->...s", cur, mats[n - 1])
        branch = np.trace(cur, axis1=0, axis2=cur.ndim - 1)
        # push bond defects into the wrap bond, correcting the o legs
        carry = np.eye(D, dtype=np.complex128)
        ok = True
        for b in range(n - 1):
            combined = carry @ mats[b]
            hit = _resolve_scaled(basis, combined, t)
            if hit is None or hit[0] not in completed[b + 1]:
                ok = False
                break
            cls, phase, scale = hit
            u, out_cls = completed[b + 1][cls]
            branch = np.moveaxis(np.tensordot(u, branch, axes=([1], [b + 1])), 0, b + 1)
            carry = (scale * phase) * basis.elements[out_cls]
        if ok:
            merged = carry @ mats[n - 1]
            hit = _resolve_scaled(basis, merged, t)
            ok = hit is not None and hit[0] == basis.identity_index
        outs.append(combo)
        weights.append(float(np.vdot(branch, branch).real))
        kept.append(bool(ok))
        branches.append(branch)
    total_weight = sum(weights)
    probs, fids, success_p = [], [], 0.0
    for w, ok, branch in zip(weights, kept, branches):
        p = w / total_weight if total_weight > 0 else 0.0
        probs.append(p)
        if ok:
            fids.append(state_fidelity(branch, target))
            success_p += p
        else:
            fids.append(None)
    return PeriodicMpoReport(outs, probs, kept, fids, float(success_p))
