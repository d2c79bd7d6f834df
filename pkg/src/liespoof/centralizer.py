"""The commuting subspace ker([f_e, .]) of a motion generator.

Attacks whose displacement lies in this subspace have the same dynamical
impact from every state; everything else is bent by the flow.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import subspace_angles

from .lie_core import SE2, LieGroupSpec

DEFAULT_TOL = 1e-9
ABS_FLOOR = 1e-12


@dataclass(frozen=True)
class SubspaceBasis:
    basis: np.ndarray  # n x d, orthonormal columns
    singular_values: np.ndarray
    rank_tolerance: float
    generator: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T

    def contains(self, xi, tol: float = 1e-9) -> bool:
        xi = np.asarray(xi, dtype=float)
        resid = xi - self.projector @ xi
        return bool(np.linalg.norm(resid) <= tol * max(1.0, np.linalg.norm(xi)))


@dataclass(frozen=True)
class Decomposition:
    ideal: np.ndarray
    residual: np.ndarray


@dataclass(frozen=True)
class TransferCheck:
    transferable: bool
    bracket_norm: float
    threshold: float

    def __bool__(self) -> bool:
        return self.transferable


class SubspaceMembershipError(ValueError):
    pass


def commuting_subspace(f_e, tol: float = DEFAULT_TOL, group: LieGroupSpec = SE2) -> SubspaceBasis:
    """Orthonormal basis of ker(ad_{f_e}) from the SVD of the ad matrix."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    f_e = np.asarray(f_e, dtype=float)
    A = group.ad_matrix(f_e)
    _, s, vt = np.linalg.svd(A)
    smax = s[0] if s.size else 0.0
    cutoff = max(tol * smax, ABS_FLOOR)
    rank = int(np.sum(s > cutoff))
    basis = vt[rank:].T.copy()
    return SubspaceBasis(basis=basis, singular_values=s, rank_tolerance=tol, generator=f_e.copy())


def is_transferable(xi, f_e, tol: float = DEFAULT_TOL, group: LieGroupSpec = SE2) -> TransferCheck:
    xi = np.asarray(xi, dtype=float)
    f_e = np.asarray(f_e, dtype=float)
    norm = float(np.linalg.norm(group.bracket(f_e, xi)))
    threshold = tol * max(1.0, float(np.linalg.norm(f_e) * np.linalg.norm(xi)))
    return TransferCheck(norm <= threshold, norm, threshold)


def decompose(xi_hat, subspace: SubspaceBasis) -> Decomposition:
    xi_hat = np.asarray(xi_hat, dtype=float)
    if xi_hat.shape != (subspace.basis.shape[0],):
        raise ValueError(f"dimension mismatch: {xi_hat.shape} vs subspace in R^{subspace.basis.shape[0]}")
    ideal = subspace.basis @ (subspace.basis.T @ xi_hat)
    return Decomposition(ideal=ideal, residual=xi_hat - ideal)


def jacobi_closure_check(subspace: SubspaceBasis, group: LieGroupSpec = SE2, tol: float = 1e-9) -> bool:
    """True iff the subspace is closed under the bracket (a subalgebra)."""
    B = subspace.basis
    P = subspace.projector
    for i in range(B.shape[1]):
        for j in range(i + 1, B.shape[1]):
            z = group.bracket(B[:, i], B[:, j])
            if np.linalg.norm(z - P @ z) > tol:
                return False
    return True


def leaf_confinement_check(x, xi, subspace: SubspaceBasis, group: LieGroupSpec = SE2, tol: float = 1e-9) -> bool:
    """Whether ``x @ exp(xi)`` stays on the coset ``x H`` of H = exp(subspace)."""
    xi = np.asarray(xi, dtype=float)
    if not subspace.contains(xi, tol):
        raise SubspaceMembershipError("displacement is not in the commuting subspace")
    x = np.asarray(x, dtype=float)
    attacked = group.compose(x, group.exp(xi))
    disp = group.log(group.compose(group.inverse(x), attacked))
    return bool(np.linalg.norm(disp - subspace.projector @ disp) <= tol * max(1.0, np.linalg.norm(disp)))


def defense_rank_inputs(
    candidates: Sequence,
    generator_map: Callable[[object], np.ndarray],
    group: LieGroupSpec = SE2,
    tol: float = DEFAULT_TOL,
) -> list[tuple[object, int, np.ndarray]]:
    """Order candidate inputs by how few transferable directions they leave.

    Ties keep the candidates' original order.
    """
    if len(candidates) == 0:
        raise ValueError("no candidate inputs to rank")
    ranked = []
    for u in candidates:
        sub = commuting_subspace(generator_map(u), tol, group)
        ranked.append((u, sub.dim, sub.basis))
    return sorted(ranked, key=lambda item: item[1])


def principal_angles(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Principal angles between the column spans of two orthonormal bases."""
    if A.shape[1] != B.shape[1]:
        raise ValueError("subspaces have different dimensions")
    # sine-based, accurate for nearly equal spans (arccos of cosines is not)
    return subspace_angles(A, B)
