"""Flows on the final subspace and Poisson brackets of spacetime observables.

Coordinates
-----------
``u`` denotes coordinates on the final constraint subspace (the ambient slice
state is ``B u + offset``). In the gauge case the flow acts on horizontal
coordinates ``w`` with ``u = C w`` for an orthonormal basis ``C`` of
``ker P``; vertical components are carried along unchanged.

Bracket convention: ``bracket(f, g)`` returns ``{g, f} = dg(X_f)``.
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import (
    CrossCheckFailed,
    DimensionMismatch,
    GaugeVariantObservable,
    InconsistentCovector,
    MissingProjector,
    NonDiagonalizable,
    NotHorizontal,
    OutOfWindow,
    ValidationError,
)
from .presymp import Classification, DEFAULT_RANK_RTOL, flat_solve, null_space

DEBUG = os.environ.get("COVBRACKETS_DEBUG", "").strip().lower() in ("1", "true", "yes", "on")


@dataclass(frozen=True)
class CauchyLinear:
    """Linear functional ``coefficients @ u + constant`` on final coordinates."""

    coefficients: np.ndarray
    constant: float = 0.0
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "coefficients", np.asarray(self.coefficients, dtype=np.float64))

    def __call__(self, u):
        return float(self.coefficients @ np.asarray(u, dtype=np.float64) + self.constant)


@dataclass(frozen=True)
class FieldPoint:
    """Value of a covariant field component at a lattice site and time."""

    component: str
    site: tuple = ()
    t: float = 0.0
    fiber: int = 0
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "site", tuple(int(s) for s in self.site))
        object.__setattr__(self, "t", float(self.t))
        if not self.label:
            where = ",".join(str(s) for s in self.site)
            object.__setattr__(self, "label", f"{self.component}({self.t:g};{where})")


@dataclass(frozen=True, eq=False)
class FlowOperator:
    """Linear Hamiltonian flow ``u(t) = F(t) u(0)`` on the final subspace."""

    method: str
    basis: np.ndarray = field(repr=False)
    offset: np.ndarray = field(repr=False)
    embed: np.ndarray = field(repr=False)
    vertical: np.ndarray | None = field(repr=False)
    generator: np.ndarray = field(repr=False)
    omega: np.ndarray = field(repr=False)
    energy: np.ndarray = field(repr=False)
    left: np.ndarray | None = field(default=None, repr=False)
    right: np.ndarray | None = field(default=None, repr=False)
    exponents: np.ndarray | None = field(default=None, repr=False)
    step: np.ndarray | None = field(default=None, repr=False)
    dt: float | None = None
    window: tuple | None = None

    @property
    def dim(self):
        return self.embed.shape[1]

    @property
    def final_dim(self):
        return self.embed.shape[0]

    @property
    def frequencies(self):
        """Angular frequencies of the spectral flow, sorted ascending."""
        if self.exponents is None:
            raise ValidationError("frequencies are only available for the spectral flow")
        return np.sort(np.abs(self.exponents.imag))

    def _factor(self, t):
        mu = self.exponents
        out = np.empty(mu.shape, dtype=complex)
        small = mu == 0
        out[small] = t
        out[~small] = np.expm1(mu[~small] * t) / mu[~small]
        return out

    def _steps(self, t):
        n = t / self.dt
        k = int(round(n))
        if abs(n - k) > 1e-9 * max(1.0, abs(n)):
            raise ValidationError(f"time {t} is not a multiple of the leapfrog step {self.dt}")
        return k

    def apply_reduced(self, w, t):
        """``F(t) @ w`` on flow coordinates (columns of a 2-d ``w`` are mapped)."""
        w = np.asarray(w, dtype=np.float64)
        if self.method == "spectral":
            f = self._factor(t)
            tmp = self.right @ w
            tmp = (f[:, None] * tmp) if tmp.ndim == 2 else f * tmp
            return w + np.real(self.left @ tmp)
        k = self._steps(t)
        m = self.step if k >= 0 else np.linalg.inv(self.step)
        out = w
        for _ in range(abs(k)):
            out = m @ out
        return out

    def apply_reduced_transpose(self, c, t):
        """``F(t)^T @ c`` on flow coordinates."""
        c = np.asarray(c, dtype=np.float64)
        if self.method == "spectral":
            f = self._factor(t)
            tmp = self.left.T @ c
            tmp = (f[:, None] * tmp) if tmp.ndim == 2 else f * tmp
            return c + np.real(self.right.T @ tmp)
        k = self._steps(t)
        m = self.step if k >= 0 else np.linalg.inv(self.step)
        out = c
        for _ in range(abs(k)):
            out = m.T @ out
        return out

    def propagator(self, t):
        """Dense ``F(t)`` on final coordinates (vertical part kept fixed)."""
        emb = self.embed
        full = emb @ self.apply_reduced(emb.T, t)
        if self.vertical is not None:
            full = full + self.vertical
        return full

    def check_time(self, t):
        if self.window is not None:
            lo, hi = self.window
            if not lo - 1e-12 <= t <= hi + 1e-12:
                raise OutOfWindow(f"time {t} outside evolution window [{lo}, {hi}]")


def _inv_transpose(omega):
    # Gamma solves omega^T Gamma = Q w
    return np.linalg.inv(omega.T)


def _spectral_parts(omega, q, rank_rtol):
    jinv = _inv_transpose(omega)
    ev, vec = np.linalg.eigh(q)
    ref = np.max(np.abs(ev)) if ev.size else 0.0
    keep = np.abs(ev) > rank_rtol * max(ref, np.finfo(float).tiny)
    if not np.any(keep):
        n = q.shape[0]
        return np.zeros((n, 0)), np.zeros((0, n)), np.zeros(0, dtype=complex)
    signs = np.sign(ev[keep])
    if not (np.all(signs > 0) or np.all(signs < 0)):
        return None
    s = signs[0]
    g = np.sqrt(np.abs(ev[keep]))[:, None] * vec[:, keep].T
    x = s * jinv @ g.T
    k = g @ x
    k = 0.5 * (k - k.T)
    lam, v = np.linalg.eigh(1j * k)
    left = x @ v
    right = v.conj().T @ g
    return left, right, -1j * lam


def _leapfrog_step(omega, q_kin, q_pot, dt):
    jinv = _inv_transpose(omega)
    a_kin = jinv @ q_kin
    a_pot = jinv @ q_pot
    half = sla.expm(0.5 * dt * a_pot)
    return half @ sla.expm(dt * a_kin) @ half


def build_flow(chain, projector=None, model=None, method="spectral", dt=None, window=None,
               rank_rtol=DEFAULT_RANK_RTOL):
    """Build the flow of the final Hamiltonian.

    Parameters
    ----------
    chain : ConstraintChainResult
    projector : ConnectionProjector, optional
        Required when the final two-form is degenerate.
    model : SliceModel, optional
        Supplies the kinetic/potential split for ``method="leapfrog"``.
    method : {"spectral", "leapfrog"}
        ``spectral`` evaluates ``exp(t A)`` exactly from an eigendecomposition
        of a reduced antisymmetric matrix. It needs a semidefinite energy and
        falls back to leapfrog (with a :class:`NonDiagonalizable` warning)
        otherwise.
    dt : float, optional
        Leapfrog step.
    window : (float, float), optional
        Allowed range of observation times.
    """
    if method not in ("spectral", "leapfrog"):
        raise ValidationError(f"unknown flow method {method!r}")
    k = chain.dim
    q_f = chain.hamiltonian_final.Q
    if np.max(np.abs(chain.hamiltonian_final.b), initial=0.0) > 1e-12:
        raise ValidationError("inhomogeneous final Hamiltonians are not supported by the flow")
    vertical = None
    if chain.classification is Classification.GAUGE:
        if projector is None:
            raise MissingProjector("a connection is required for a degenerate final form")
        if projector.dim != k:
            raise DimensionMismatch("projector acts on a different space")
        pm = projector.matrix
        emb = null_space(pm, rank_rtol, scale=1.0)
        if emb.shape[1] != k - chain.kernel_final.dim:
            raise ValidationError("projector is not complementary to the kernel")
        vertical = pm
    else:
        emb = np.eye(k)
    om = emb.T @ chain.omega_final @ emb
    om = 0.5 * (om - om.T)
    q = emb.T @ q_f @ emb
    q = 0.5 * (q + q.T)
    gen = _inv_transpose(om) @ q if om.size else np.zeros((0, 0))
    common = dict(
        basis=chain.final.basis, offset=chain.final.offset, embed=emb, vertical=vertical,
        generator=gen, omega=om, energy=q, window=window,
    )
    if method == "spectral":
        parts = _spectral_parts(om, q, rank_rtol)
        if parts is not None:
            left, right, mu = parts
            return FlowOperator("spectral", left=left, right=right, exponents=mu, dt=dt, **common)
        warnings.warn("indefinite final energy; using leapfrog", NonDiagonalizable, stacklevel=2)
        if dt is None:
            raise ValidationError("leapfrog fallback needs a time step")
    if dt is None or not dt > 0:
        raise ValidationError("leapfrog needs a positive time step")
    if model is None:
        raise ValidationError("leapfrog needs the slice model for the kinetic split")
    mask = model.momentum_mask.astype(float)
    q_amb = model.system.hamiltonian.Q
    kin_amb = q_amb * np.outer(mask, mask)
    lift = chain.final.basis @ emb
    q_kin = lift.T @ kin_amb @ lift
    q_pot = q - q_kin
    step = _leapfrog_step(om, q_kin, q_pot, float(dt))
    return FlowOperator("leapfrog", step=step, dt=float(dt), **common)


def _check_horizontal(flow, u):
    if flow.vertical is None:
        return
    vu = flow.vertical @ u
    if np.linalg.norm(vu) > 1e-9 * max(1.0, np.linalg.norm(u)):
        raise NotHorizontal(f"datum has vertical component of norm {np.linalg.norm(vu):.3e}")


def evolve(flow, u, t):
    """Evolve a horizontal datum ``u`` (final coordinates) by time ``t``."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape[0] != flow.final_dim:
        raise DimensionMismatch(f"datum has length {u.shape[0]}, flow acts on {flow.final_dim}")
    _check_horizontal(flow, u)
    w = flow.embed.T @ u
    return flow.embed @ flow.apply_reduced(w, t)


def evolve_states(flow, u, times):
    """Ambient slice states ``B u(t) + offset`` at each of ``times``."""
    return [flow.basis @ evolve(flow, u, t) + flow.offset for t in times]


def _final_functional(flow, r_amb, tau):
    r_u = flow.basis.T @ r_amb
    emb = flow.embed
    c = emb @ flow.apply_reduced_transpose(emb.T @ r_u, tau)
    if flow.vertical is not None:
        c = c + flow.vertical.T @ r_u
    return c, float(r_amb @ flow.offset)


def pullback_observable(obs, flow, model, sigma_time):
    """Express a spacetime observable as a linear functional of slice data.

    A :class:`CauchyLinear` is returned unchanged. For a :class:`FieldPoint`
    the datum at ``sigma_time`` is evolved to ``obs.t`` and the covariant
    component is read off.
    """
    if isinstance(obs, CauchyLinear):
        if obs.coefficients.shape != (flow.final_dim,):
            raise DimensionMismatch("Cauchy functional has the wrong length")
        return obs
    flow.check_time(obs.t)
    flow.check_time(sigma_time)
    r_amb = model.field_functional(obs.component, obs.site, obs.fiber)
    c, const = _final_functional(flow, r_amb, obs.t - sigma_time)
    return CauchyLinear(c, const, obs.label)


def _kernel_check(chain, coeffs, labels=None):
    ker = chain.kernel_final
    if ker.dim == 0:
        return
    viol = ker.basis.T @ coeffs
    scale = 1.0 + np.max(np.abs(coeffs), axis=0)
    bad = np.max(np.abs(viol), axis=0) > 1e-8 * scale
    if np.any(bad):
        idx = int(np.flatnonzero(np.atleast_1d(bad))[0])
        name = labels[idx] if labels else "observable"
        raise GaugeVariantObservable(f"{name} is not invariant under kernel directions")


def hamiltonian_vector_field(obs, chain, projector=None):
    """Hamiltonian vector field of a :class:`CauchyLinear` (final coordinates)."""
    return _vector_fields(np.asarray(obs.coefficients)[:, None], chain, projector, [obs.label])[:, 0]


def _vector_fields(coeffs, chain, projector, labels=None):
    if coeffs.shape[0] != chain.dim:
        raise DimensionMismatch(f"functional has length {coeffs.shape[0]}, final space is {chain.dim}")
    if chain.classification is Classification.GAUGE and projector is None:
        raise MissingProjector("a connection is required for a degenerate final form")
    _kernel_check(chain, coeffs, labels)
    try:
        return flat_solve(chain.omega_final, coeffs, projector, kernel_space=chain.kernel_final)
    except GaugeVariantObservable:
        raise
    except InconsistentCovector as exc:
        raise GaugeVariantObservable(str(exc)) from exc


def bracket(f, g, chain, projector=None):
    """Poisson bracket ``{g, f} = dg(X_f)`` of two Cauchy functionals."""
    xf = hamiltonian_vector_field(f, chain, projector)
    _kernel_check(chain, g.coefficients[:, None], [g.label])
    return float(g.coefficients @ xf)


def bracket_spacetime(obs_f, obs_g, flow, model, sigma_time, chain, projector=None,
                      cross_check=None):
    """Bracket ``{G, F}`` of spacetime observables via a Cauchy slice.

    With ``cross_check`` (default: the ``COVBRACKETS_DEBUG`` environment
    flag) the value is recomputed by transporting ``X_f`` along the flow and
    evaluating ``G`` on it; a mismatch above 1e-10 raises
    :class:`CrossCheckFailed`.
    """
    f = pullback_observable(obs_f, flow, model, sigma_time)
    g = pullback_observable(obs_g, flow, model, sigma_time)
    val = bracket(f, g, chain, projector)
    if cross_check is None:
        cross_check = DEBUG
    if cross_check and isinstance(obs_g, FieldPoint):
        xf = hamiltonian_vector_field(f, chain, projector)
        moved = flow.embed @ flow.apply_reduced(flow.embed.T @ xf, obs_g.t - sigma_time)
        r_amb = model.field_functional(obs_g.component, obs_g.site, obs_g.fiber)
        alt = float(r_amb @ (flow.basis @ moved))
        if abs(alt - val) > 1e-10 * max(1.0, abs(val)):
            raise CrossCheckFailed(f"tangent-lift value {alt!r} differs from {val!r}")
    return val


def bracket_matrix(fs, gs, chain, projector=None):
    """Entries ``{g_i, f_i}`` for paired lists of Cauchy functionals."""
    if len(fs) != len(gs):
        raise ValidationError("need as many f as g functionals")
    if not fs:
        return np.zeros(0)
    cf = np.stack([f.coefficients for f in fs], axis=1)
    cg = np.stack([g.coefficients for g in gs], axis=1)
    xf = _vector_fields(cf, chain, projector, [f.label for f in fs])
    _kernel_check(chain, cg, [g.label for g in gs])
    return np.einsum("ij,ij->j", cg, xf)


def bracket_batch(pairs, flow, model, sigma_time, chain, projector=None, max_workers=None):
    """Brackets ``{G, F}`` for a list of ``(F, G)`` pairs, in input order.

    Pullbacks run on a thread pool; ``Executor.map`` keeps the output aligned
    with ``pairs`` whatever the completion order.
    """
    pairs = list(pairs)

    def pull(pair):
        f, g = pair
        return (pullback_observable(f, flow, model, sigma_time),
                pullback_observable(g, flow, model, sigma_time))

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        pulled = list(pool.map(pull, pairs))
    return bracket_matrix([p[0] for p in pulled], [p[1] for p in pulled], chain, projector)
