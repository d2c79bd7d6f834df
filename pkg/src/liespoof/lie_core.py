"""Matrix Lie group arithmetic in generator coordinates.

Algebra elements are plain 1-D numpy arrays of length ``dim_algebra`` holding
coordinates in the group's generator basis. Group elements are square numpy
arrays in the homogeneous matrix representation.

Adjoint convention: ``adjoint_right(g)`` is the matrix of
``xi -> vee(g @ hat(xi) @ inv(g))``. For SE(2) in (f, l, theta) coordinates it is

    [[cos t, -sin t,  p_l],
     [sin t,  cos t, -p_f],
     [0,      0,      1  ]]

so that ``exp(adjoint_right(g) @ xi) == g @ exp(xi) @ inv(g)`` and
``adjoint_right(g @ h) == adjoint_right(g) @ adjoint_right(h)``. A drift that is
carried along by one step ``s`` of right-translation flow is advected by
``adjoint_right(inverse(s))``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import logm

SMALL_ANGLE = 1e-6
VEE_TOL = 1e-9
SO2_CUT_TOL = 1e-9


class LieError(ValueError):
    """Raised for malformed algebra/group inputs."""


class CutLocusError(LieError):
    """Raised when log is requested outside the injectivity radius."""


def _structure_constants(generators: np.ndarray) -> np.ndarray:
    n, m, _ = generators.shape
    basis = generators.reshape(n, m * m).T
    c = np.zeros((n, n, n))
    for i in range(n):
        for j in range(n):
            comm = generators[i] @ generators[j] - generators[j] @ generators[i]
            coeffs, *_ = np.linalg.lstsq(basis, comm.ravel(), rcond=None)
            resid = np.linalg.norm(basis @ coeffs - comm.ravel())
            if resid > 1e-9 * max(1.0, np.linalg.norm(comm)):
                raise LieError(
                    f"generators are not closed under the commutator ([e{i}, e{j}] off span by {resid:.3g})"
                )
            c[i, j] = coeffs
    return c


@dataclass(frozen=True, eq=False)
class LieGroupSpec:
    """A matrix Lie group given by a basis of its Lie algebra.

    Structure constants are derived from the generators, never supplied.
    """

    name: str
    generators: np.ndarray
    structure_constants: np.ndarray = field(init=False, repr=False)
    _basis: np.ndarray = field(init=False, repr=False)
    _pinv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        gens = np.array(self.generators, dtype=float)
        if gens.ndim != 3 or gens.shape[1] != gens.shape[2]:
            raise LieError("generators must be an (n, m, m) array")
        if not np.all(np.isfinite(gens)):
            raise LieError("generators must be finite")
        gens.setflags(write=False)
        object.__setattr__(self, "generators", gens)
        basis = gens.reshape(gens.shape[0], -1).T
        if np.linalg.matrix_rank(basis) < gens.shape[0]:
            raise LieError("generators are linearly dependent")
        object.__setattr__(self, "_basis", basis)
        object.__setattr__(self, "_pinv", np.linalg.pinv(basis))
        c = _structure_constants(gens)
        c.setflags(write=False)
        object.__setattr__(self, "structure_constants", c)

    @property
    def dim_algebra(self) -> int:
        return self.generators.shape[0]

    @property
    def dim_matrix(self) -> int:
        return self.generators.shape[1]

    def identity(self) -> np.ndarray:
        return np.eye(self.dim_matrix)

    def _coords(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if xi.shape != (self.dim_algebra,):
            raise LieError(f"expected {self.dim_algebra} algebra coordinates, got shape {xi.shape}")
        return xi

    def hat(self, xi) -> np.ndarray:
        xi = self._coords(xi)
        return np.tensordot(xi, self.generators, axes=1)

    def vee(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        m = self.dim_matrix
        if X.shape != (m, m):
            raise LieError(f"expected a {m}x{m} matrix, got shape {X.shape}")
        coords = self._pinv @ X.ravel()
        resid = np.linalg.norm(self._basis @ coords - X.ravel())
        if resid > VEE_TOL * max(1.0, np.linalg.norm(X)):
            raise LieError(f"matrix is not in the Lie algebra (residual {resid:.3g})")
        return coords

    def exp(self, xi) -> np.ndarray:
        return expm_scaling_squaring(self.hat(xi))

    def log(self, g) -> np.ndarray:
        g = np.asarray(g, dtype=float)
        L = logm(g)
        if np.iscomplexobj(L):
            if np.max(np.abs(L.imag)) > 1e-9:
                raise CutLocusError("group element has no real principal logarithm")
            L = L.real
        return self.vee(L)

    def compose(self, g, h) -> np.ndarray:
        return np.asarray(g, dtype=float) @ np.asarray(h, dtype=float)

    def inverse(self, g) -> np.ndarray:
        return np.linalg.inv(np.asarray(g, dtype=float))

    def bracket(self, xi, eta) -> np.ndarray:
        xi = self._coords(xi)
        eta = self._coords(eta)
        return np.einsum("i,j,ijk->k", xi, eta, self.structure_constants)

    def ad_matrix(self, xi) -> np.ndarray:
        """Matrix of ``eta -> [xi, eta]``; column j is ``[xi, e_j]``."""
        xi = self._coords(xi)
        return np.einsum("i,ijk->kj", xi, self.structure_constants)

    def adjoint_right(self, g) -> np.ndarray:
        g = np.asarray(g, dtype=float)
        g_inv = self.inverse(g)
        cols = [self.vee(g @ e @ g_inv) for e in self.generators]
        return np.column_stack(cols)

    def adjoint_operator_norm(self, g) -> float:
        return float(np.linalg.svd(self.adjoint_right(g), compute_uv=False)[0])

    def conjugate(self, g, h) -> np.ndarray:
        """``g @ h @ inv(g)``, the conjugation realized by ``adjoint_right``."""
        return self.compose(self.compose(g, h), self.inverse(g))


def expm_scaling_squaring(X: np.ndarray, order: int = 18) -> np.ndarray:
    """Dense matrix exponential by scaling and squaring with a Taylor core."""
    X = np.asarray(X, dtype=float)
    norm = np.linalg.norm(X, 1)
    squarings = max(0, math.ceil(math.log2(norm / 0.5))) if norm > 0.5 else 0
    A = X / (2.0**squarings)
    result = np.eye(X.shape[0])
    term = np.eye(X.shape[0])
    for k in range(1, order + 1):
        term = term @ A / k
        result = result + term
    for _ in range(squarings):
        result = result @ result
    return result


def _rot(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def _v_coeffs(theta: float) -> tuple[float, float]:
    """(sin t / t, (1 - cos t) / t) with a small-angle series."""
    if abs(theta) < SMALL_ANGLE:
        t2 = theta * theta
        return 1.0 - t2 / 6.0 + t2 * t2 / 120.0, theta / 2.0 - theta * t2 / 24.0 + theta * t2 * t2 / 720.0
    return math.sin(theta) / theta, (1.0 - math.cos(theta)) / theta


class SE2Group(LieGroupSpec):
    """SE(2) with basis (e_f, e_l, e_theta) and closed-form maps."""

    def __init__(self):
        e_f = np.zeros((3, 3))
        e_f[0, 2] = 1.0
        e_l = np.zeros((3, 3))
        e_l[1, 2] = 1.0
        e_th = np.zeros((3, 3))
        e_th[0, 1], e_th[1, 0] = -1.0, 1.0
        super().__init__("SE2", np.stack([e_f, e_l, e_th]))

    def hat(self, xi) -> np.ndarray:
        f, l, th = self._coords(xi)
        return np.array([[0.0, -th, f], [th, 0.0, l], [0.0, 0.0, 0.0]])

    def vee(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape != (3, 3):
            raise LieError(f"expected a 3x3 matrix, got shape {X.shape}")
        coords = np.array([X[0, 2], X[1, 2], 0.5 * (X[1, 0] - X[0, 1])])
        resid = np.linalg.norm(X - self.hat(coords))
        if resid > VEE_TOL * max(1.0, np.linalg.norm(X)):
            raise LieError(f"matrix is not in se(2) (residual {resid:.3g})")
        return coords

    def exp(self, xi) -> np.ndarray:
        f, l, th = self._coords(xi)
        a, b = _v_coeffs(th)
        g = np.eye(3)
        g[:2, :2] = _rot(th)
        g[0, 2] = a * f - b * l
        g[1, 2] = b * f + a * l
        return g

    def log(self, g) -> np.ndarray:
        g = np.asarray(g, dtype=float)
        th = math.atan2(g[1, 0], g[0, 0])
        if abs(th) >= math.pi - SO2_CUT_TOL:
            raise CutLocusError(f"heading {th:.12g} is on the cut locus of SE(2) log")
        # inverse of V(theta): (t/2) cot(t/2) on the diagonal, +-t/2 off it
        half = 0.5 * th
        if abs(th) < SMALL_ANGLE:
            t2 = th * th
            d = 1.0 - t2 / 12.0 - t2 * t2 / 720.0
        else:
            d = half * math.sin(th) / (1.0 - math.cos(th))
        x, y = g[0, 2], g[1, 2]
        return np.array([d * x + half * y, -half * x + d * y, th])

    def inverse(self, g) -> np.ndarray:
        g = np.asarray(g, dtype=float)
        out = np.eye(3)
        Rt = g[:2, :2].T
        out[:2, :2] = Rt
        out[:2, 2] = -Rt @ g[:2, 2]
        return out

    def adjoint_right(self, g) -> np.ndarray:
        g = np.asarray(g, dtype=float)
        out = np.eye(3)
        out[:2, :2] = g[:2, :2]
        out[0, 2] = g[1, 2]
        out[1, 2] = -g[0, 2]
        return out

    def adjoint_operator_norm(self, g) -> float:
        g = np.asarray(g, dtype=float)
        r = math.hypot(g[0, 2], g[1, 2])
        return 0.5 * (r + math.sqrt(r * r + 4.0))

    @staticmethod
    def from_pose(x: float, y: float, theta: float) -> np.ndarray:
        g = np.eye(3)
        g[:2, :2] = _rot(theta)
        g[:2, 2] = (x, y)
        return g

    @staticmethod
    def to_pose(g) -> tuple[float, float, float]:
        g = np.asarray(g, dtype=float)
        return float(g[0, 2]), float(g[1, 2]), math.atan2(g[1, 0], g[0, 0])

    @staticmethod
    def is_valid(g, tol: float = 1e-9) -> bool:
        g = np.asarray(g, dtype=float)
        if g.shape != (3, 3) or not np.all(np.isfinite(g)):
            return False
        R = g[:2, :2]
        return (
            np.allclose(R.T @ R, np.eye(2), atol=tol)
            and abs(np.linalg.det(R) - 1.0) < tol
            and np.allclose(g[2], [0.0, 0.0, 1.0], atol=tol)
        )


SE2 = SE2Group()

_BUILTIN = {"SE2": SE2}


def load_group_spec(path) -> LieGroupSpec:
    """Load a group from JSON ``{name, dim_algebra, dim_matrix, generators}``.

    ``generators`` holds one row-major list of ``dim_matrix**2`` numbers (or a
    nested ``dim_matrix x dim_matrix`` list) per basis element.
    """
    data = json.loads(Path(path).read_text())
    try:
        n = int(data["dim_algebra"])
        m = int(data["dim_matrix"])
        gens = np.array(data["generators"], dtype=float).reshape(n, m, m)
        name = str(data["name"])
    except (KeyError, ValueError, TypeError) as exc:
        raise LieError(f"invalid group spec file {path}: {exc}") from exc
    return LieGroupSpec(name, gens)


def get_group(name_or_path: str) -> LieGroupSpec:
    if name_or_path in _BUILTIN:
        return _BUILTIN[name_or_path]
    return load_group_spec(name_or_path)
