"""Linear pre-symplectic Hamiltonian systems and the constraint algorithm.

Conventions
-----------
The two-form is ``Omega(X, Y) = X^T omega Y``. A vector field ``X`` is the
Hamiltonian field of a covector ``alpha`` when ``i_X Omega = alpha``, which in
matrices reads ``omega^T X = alpha``. Dynamics ``Gamma`` therefore solves
``omega^T Gamma = Q z + b``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla

from .errors import (
    DegenerateWithoutConnection,
    DimensionMismatch,
    EmptyFinalManifold,
    InconsistentCovector,
    InvariantError,
    NoConvergence,
    NonAntisymmetric,
)

ANTISYMMETRY_TOL = 1e-10
SYMMETRY_TOL = 1e-12
ORTHONORMAL_TOL = 1e-10
DEFAULT_RANK_RTOL = 1e-10
DEFAULT_MAX_ITER = 64


def _frozen(a, dtype=np.float64):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def _inf_norm(m):
    m = np.asarray(m)
    if m.size == 0:
        return 0.0
    return float(np.abs(m).sum(axis=1).max())


def null_space(m, rank_rtol=DEFAULT_RANK_RTOL, scale=None):
    """Orthonormal basis of the null space of ``m``.

    Rows and columns that are exactly zero are stripped before the SVD, so
    unit directions stay exact and large sparse blocks cost nothing. A
    singular value counts as nonzero when it exceeds
    ``rank_rtol * max(sigma_max, scale)``.
    """
    m = np.asarray(m, dtype=np.float64)
    nrow, ncol = m.shape
    if ncol == 0:
        return np.zeros((0, 0))
    nz = m != 0
    rows = np.flatnonzero(nz.any(axis=1))
    cols = nz.any(axis=0)
    free = np.flatnonzero(~cols)
    active = np.flatnonzero(cols)
    parts = []
    if free.size:
        e = np.zeros((ncol, free.size))
        e[free, np.arange(free.size)] = 1.0
        parts.append(e)
    if active.size:
        red = m[np.ix_(rows, active)]
        _, s, vh = np.linalg.svd(red, full_matrices=True)
        ref = s[0] if s.size else 0.0
        if scale is not None:
            ref = max(ref, scale)
        rank = int(np.count_nonzero(s > rank_rtol * ref))
        nv = vh[rank:].T
        if nv.shape[1]:
            e = np.zeros((ncol, nv.shape[1]))
            e[active] = nv
            parts.append(e)
    if not parts:
        return np.zeros((ncol, 0))
    return np.hstack(parts)


def orthonormalize(basis, rank_rtol=DEFAULT_RANK_RTOL):
    """Orthonormal basis for the column span of ``basis``."""
    basis = np.asarray(basis, dtype=np.float64)
    if basis.shape[1] == 0:
        return basis.copy()
    u, s, _ = np.linalg.svd(basis, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((basis.shape[0], 0))
    rank = int(np.count_nonzero(s > rank_rtol * s[0]))
    return u[:, :rank]


@dataclass(frozen=True)
class QuadraticHamiltonian:
    """``H(z) = 1/2 z^T Q z + b^T z + c`` with symmetric ``Q``."""

    Q: np.ndarray
    b: np.ndarray | None = None
    c: float = 0.0

    def __post_init__(self):
        q = np.asarray(self.Q, dtype=np.float64)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise DimensionMismatch(f"Q must be square, got shape {q.shape}")
        if q.size and np.max(np.abs(q - q.T)) > SYMMETRY_TOL:
            raise InvariantError("Q is not symmetric")
        b = np.zeros(q.shape[0]) if self.b is None else np.asarray(self.b, dtype=np.float64)
        if b.shape != (q.shape[0],):
            raise DimensionMismatch(f"b has shape {b.shape}, expected ({q.shape[0]},)")
        object.__setattr__(self, "Q", _frozen(q))
        object.__setattr__(self, "b", _frozen(b))
        object.__setattr__(self, "c", float(self.c))

    @property
    def dim(self):
        return self.Q.shape[0]

    def __call__(self, z):
        z = np.asarray(z, dtype=np.float64)
        return 0.5 * z @ self.Q @ z + self.b @ z + self.c

    def gradient(self, z):
        return self.Q @ np.asarray(z, dtype=np.float64) + self.b


@dataclass(frozen=True)
class PresymplecticSystem:
    """Vector space with a constant (possibly degenerate) two-form and energy."""

    omega: np.ndarray
    hamiltonian: QuadraticHamiltonian
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        w = np.asarray(self.omega, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise DimensionMismatch(f"omega must be square, got shape {w.shape}")
        if w.shape[0] != self.hamiltonian.dim:
            raise DimensionMismatch(
                f"omega is {w.shape[0]}-dimensional, Hamiltonian is {self.hamiltonian.dim}-dimensional"
            )
        if w.size and np.max(np.abs(w + w.T)) > ANTISYMMETRY_TOL:
            raise NonAntisymmetric(f"max |omega + omega^T| = {np.max(np.abs(w + w.T)):.3e}")
        object.__setattr__(self, "omega", _frozen(w))

    @property
    def dim(self):
        return self.omega.shape[0]


@dataclass(frozen=True)
class LinearSubspace:
    """Affine subspace ``{basis @ w + offset}`` with orthonormal ``basis``."""

    basis: np.ndarray
    offset: np.ndarray | None = None

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=np.float64)
        if b.ndim != 2:
            raise DimensionMismatch("basis must be a 2-d array")
        if b.shape[1] and np.max(np.abs(b.T @ b - np.eye(b.shape[1]))) > ORTHONORMAL_TOL:
            raise InvariantError("basis columns are not orthonormal")
        o = np.zeros(b.shape[0]) if self.offset is None else np.asarray(self.offset, dtype=np.float64)
        if o.shape != (b.shape[0],):
            raise DimensionMismatch("offset length does not match ambient dimension")
        object.__setattr__(self, "basis", _frozen(b))
        object.__setattr__(self, "offset", _frozen(o))

    @property
    def ambient_dim(self):
        return self.basis.shape[0]

    @property
    def dim(self):
        return self.basis.shape[1]

    def embed(self, w):
        return self.basis @ np.asarray(w, dtype=np.float64) + self.offset

    def coordinates(self, z):
        return self.basis.T @ (np.asarray(z, dtype=np.float64) - self.offset)

    def project(self, z):
        return self.embed(self.coordinates(z))

    def contains(self, z, tol=1e-10):
        z = np.asarray(z, dtype=np.float64)
        return bool(np.linalg.norm(self.project(z) - z) <= tol * (1.0 + np.linalg.norm(z)))


class Classification(enum.Enum):
    SYMPLECTIC = "Symplectic"
    GAUGE = "Gauge"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class ConstraintStep:
    """Affine conditions ``rows @ z = rhs`` imposed at one restriction step."""

    rows: np.ndarray
    rhs: np.ndarray


@dataclass(frozen=True)
class ConstraintChainResult:
    """Output of :func:`constraint_algorithm`.

    ``final`` is the last chain element unless coordinates were pinned with
    :func:`pin_coordinates`, in which case it is that restriction.
    """

    chain: tuple
    final: LinearSubspace
    omega_final: np.ndarray
    hamiltonian_final: QuadraticHamiltonian
    kernel_final: LinearSubspace
    classification: Classification
    iterations: int
    constraints: tuple = ()
    pinned: tuple = ()

    @property
    def dim(self):
        return self.final.dim

    def to_final(self, z):
        return self.final.coordinates(z)

    def to_ambient(self, u):
        return self.final.embed(u)


def kernel(omega, rank_rtol=DEFAULT_RANK_RTOL):
    """Kernel of a two-form as an orthonormal :class:`LinearSubspace`."""
    w = np.asarray(omega, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise DimensionMismatch(f"omega must be square, got shape {w.shape}")
    if w.size and np.max(np.abs(w + w.T)) > ANTISYMMETRY_TOL:
        raise NonAntisymmetric(f"max |omega + omega^T| = {np.max(np.abs(w + w.T)):.3e}")
    return LinearSubspace(null_space(w, rank_rtol))


def orthosymplectic_complement(system, subspace, rank_rtol=DEFAULT_RANK_RTOL):
    """All ``X`` with ``Omega(X, Y) = 0`` for every ``Y`` tangent to ``subspace``."""
    if subspace.ambient_dim != system.dim:
        raise DimensionMismatch("subspace and system live in different spaces")
    m = subspace.basis.T @ system.omega.T
    return LinearSubspace(null_space(m, rank_rtol, scale=_inf_norm(system.omega)))


def _restrict(system, sub, rank_rtol):
    ham = system.hamiltonian
    b, o = sub.basis, sub.offset
    om = b.T @ system.omega @ b
    om = 0.5 * (om - om.T)
    q = b.T @ ham.Q @ b
    q = 0.5 * (q + q.T)
    h = QuadraticHamiltonian(q, b.T @ (ham.Q @ o + ham.b), float(ham(o)))
    ker = kernel(om, rank_rtol)
    cls = Classification.SYMPLECTIC if ker.dim == 0 else Classification.GAUGE
    return om, h, ker, cls


def constraint_algorithm(system, rank_rtol=DEFAULT_RANK_RTOL, max_iter=DEFAULT_MAX_ITER):
    """Find the final constraint subspace on which the dynamics is consistent.

    Starting from the whole space, each step keeps the points where the
    differential of the energy annihilates the orthosymplectic complement of
    the current subspace. The loop stops once a step imposes no new condition.

    Raises
    ------
    EmptyFinalManifold
        If the affine conditions become inconsistent.
    NoConvergence
        If more than ``max_iter`` restriction steps are needed.
    """
    ham = system.hamiltonian
    n = system.dim
    qscale = max(_inf_norm(ham.Q), np.finfo(float).tiny)
    current = LinearSubspace(np.eye(n))
    chain = [current]
    steps = []
    for _ in range(max_iter + 1):
        comp = orthosymplectic_complement(system, current, rank_rtol).basis
        rows = comp.T @ ham.Q
        rhs = -(comp.T @ ham.b)
        cw = rows @ current.basis
        rw = rhs - rows @ current.offset
        nb = null_space(cw, rank_rtol, scale=qscale)
        k = current.dim
        tol = 1e-9 * (1.0 + np.linalg.norm(rhs) + qscale * (1.0 + np.linalg.norm(current.offset)))
        if nb.shape[1] == k:
            if np.linalg.norm(rw) > tol:
                raise EmptyFinalManifold("constraints are inconsistent on the current subspace")
            om, h, ker, cls = _restrict(system, current, rank_rtol)
            return ConstraintChainResult(
                chain=tuple(chain),
                final=current,
                omega_final=_frozen(om),
                hamiltonian_final=h,
                kernel_final=ker,
                classification=cls,
                iterations=len(chain) - 1,
                constraints=tuple(steps),
            )
        w0 = np.linalg.lstsq(cw, rw, rcond=None)[0] if cw.size else np.zeros(k)
        if np.linalg.norm(cw @ w0 - rw) > tol:
            raise EmptyFinalManifold("constraints are inconsistent on the current subspace")
        basis = orthonormalize(current.basis @ nb, rank_rtol) if nb.shape[1] else np.zeros((n, 0))
        offset = current.offset + current.basis @ w0
        offset = offset - basis @ (basis.T @ offset)
        current = LinearSubspace(basis, offset)
        chain.append(current)
        steps.append(ConstraintStep(_frozen(rows), _frozen(rhs)))
    raise NoConvergence(f"no stable subspace after {max_iter} restriction steps")


def pin_coordinates(result, system, indices, rank_rtol=DEFAULT_RANK_RTOL, tol=1e-9):
    """Restrict the final subspace to ``z[indices] = 0``.

    Only inert coordinates may be pinned: the directions removed must lie in
    the kernel of the final two-form and must not enter the final energy.
    """
    indices = np.asarray(sorted(set(int(i) for i in indices)), dtype=int)
    if indices.size == 0:
        return result
    if indices.min() < 0 or indices.max() >= system.dim:
        raise DimensionMismatch("pinned index outside the ambient space")
    fin = result.final
    sel = fin.basis[indices]
    keep = null_space(sel, rank_rtol, scale=1.0)
    removed = null_space(keep.T, rank_rtol, scale=1.0) if keep.shape[1] else np.eye(fin.dim)
    scale = 1.0 + _inf_norm(result.omega_final) + _inf_norm(result.hamiltonian_final.Q)
    if removed.shape[1]:
        if np.max(np.abs(result.omega_final @ removed)) > tol * scale:
            raise InvariantError("pinned directions are not in the kernel of the final form")
        hq = result.hamiltonian_final.Q @ removed
        hb = result.hamiltonian_final.b @ removed
        if max(np.max(np.abs(hq)), np.max(np.abs(hb))) > tol * scale:
            raise InvariantError("pinned directions enter the final Hamiltonian")
    offset = fin.offset.copy()
    if np.any(np.abs(offset[indices]) > tol):
        raise InvariantError("final offset has nonzero pinned coordinates")
    new = LinearSubspace(orthonormalize(fin.basis @ keep, rank_rtol), offset)
    om, h, ker, cls = _restrict(system, new, rank_rtol)
    return replace(
        result,
        final=new,
        omega_final=_frozen(om),
        hamiltonian_final=h,
        kernel_final=ker,
        classification=cls,
        pinned=tuple(result.pinned) + tuple(int(i) for i in indices),
    )


def _projector_matrix(horizontal):
    if horizontal is None:
        return None
    mat = getattr(horizontal, "matrix", horizontal)
    return np.asarray(mat, dtype=np.float64)


def flat_solve(omega_final, covector, horizontal=None, rank_rtol=DEFAULT_RANK_RTOL,
               kernel_space=None):
    """Solve ``i_X Omega = covector`` for ``X``.

    ``covector`` may be a vector or a ``(k, m)`` stack of columns. In the
    degenerate case the solution is made unique by requiring ``P X = 0`` for
    the supplied vertical projector ``P``.
    """
    om = np.asarray(omega_final, dtype=np.float64)
    c = np.asarray(covector, dtype=np.float64)
    if c.shape[0] != om.shape[0]:
        raise DimensionMismatch(f"covector length {c.shape[0]} != {om.shape[0]}")
    ker = kernel(om, rank_rtol) if kernel_space is None else kernel_space
    cscale = 1.0 + np.max(np.abs(c)) if c.size else 1.0
    if ker.dim == 0:
        x = sla.solve(om.T, c)
    else:
        p = _projector_matrix(horizontal)
        if p is None:
            raise DegenerateWithoutConnection(
                f"two-form has a {ker.dim}-dimensional kernel and no projector was supplied"
            )
        viol = ker.basis.T @ c
        if np.max(np.abs(viol)) > 1e-8 * cscale:
            raise InconsistentCovector(
                f"covector does not annihilate the kernel (violation {np.max(np.abs(viol)):.3e})"
            )
        hb = null_space(p, rank_rtol, scale=1.0)
        if hb.shape[1] != om.shape[0] - ker.dim:
            raise InvariantError("projector is not complementary to the kernel")
        a = om.T @ hb
        y = np.linalg.lstsq(a, c, rcond=None)[0]
        x = hb @ y
    res = om.T @ x - c
    if res.size and np.max(np.abs(res)) > 1e-8 * cscale * (1.0 + _inf_norm(om)):
        raise InconsistentCovector(f"flat equation residual {np.max(np.abs(res)):.3e}")
    return x
