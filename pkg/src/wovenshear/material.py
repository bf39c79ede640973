"""Elastoplastic constitutive kernel for the fiber angle.

The single scalar internal mechanism is a plastic angle change phi_p with
isotropic hardening: the shear stress conjugate to the angle cosine is
tau = mu_f * phi_e with phi_e = phi - phi_p, admissible while
|tau| <= f_iso(q).  The return map is a pure function (it never mutates the
incoming state) and the batched variant drives all Gauss points of a mesh
in one call.  Stress-like parameters are in force per reference length
(N/mm in the calibrated data sets); the library itself is unit-agnostic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .kinematics import fiber_state, structural_tensors

__all__ = [
    "ConvergenceError",
    "ElastoplasticParams",
    "HyperelasticParams",
    "PlasticState",
    "StressReturn",
    "f_iso",
    "f_iso_prime",
    "yield_function",
    "return_map",
    "return_map_batch",
    "angle_stress_and_tangent",
    "membrane_stress",
    "BendingResponse",
    "moments_and_bending_tangents",
    "strain_energy",
    "drive_angle_path",
    "DriveResult",
    "params_from_dict",
    "params_to_dict",
    "load_params",
    "save_params",
    "replace_params",
    "PARAM_JSON_KEYS",
]

# flat JSON schema shared by parameter files, in canonical order
PARAM_JSON_KEYS = (
    "mu_f", "tau_y", "A", "a", "B", "b", "C", "c",
    "eps_L", "beta_n", "beta_g", "beta_tau",
)

_EP_FIELD_BY_KEY = {
    "mu_f": "mu_f", "tau_y": "tau_y",
    "A": "A_h", "a": "a_h", "B": "B_h", "b": "b_h", "C": "C_h", "c": "c_h",
}
_HP_FIELD_BY_KEY = {
    "eps_L": "eps_L", "beta_n": "beta_n", "beta_g": "beta_g",
    "beta_tau": "beta_tau",
}

# admissibility grid for the constructor check of f_iso' > 0
_Q_CHECK = np.linspace(0.0, 1.5, 1501)


class ConvergenceError(RuntimeError):
    """Raised when an iterative solve fails; carries the last residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class ElastoplasticParams:
    """Shear stiffness and isotropic hardening constants.

    The hardening curve is
    ``f_iso(q) = tau_y + A_h asinh(a_h q) + B_h tanh(b_h q) + C_h q^c_h``.
    ``c_h >= 1`` keeps the derivative finite at q = 0, and construction
    verifies that ``f_iso'(q) > 0`` across the working range q in [0, 1.5]
    (sampled at 1e-3), so a strictly hardening response is guaranteed.
    """

    mu_f: float
    tau_y: float
    A_h: float = 0.0
    a_h: float = 1.0
    B_h: float = 0.0
    b_h: float = 1.0
    C_h: float = 0.0
    c_h: float = 1.0

    def __post_init__(self):
        if self.mu_f <= 0.0:
            raise ValueError(f"mu_f must be > 0, got {self.mu_f}")
        if self.tau_y < 0.0:
            raise ValueError(f"tau_y must be >= 0, got {self.tau_y}")
        for name in ("A_h", "B_h", "C_h"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        for name in ("a_h", "b_h"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.c_h < 1.0:
            raise ValueError(f"c_h must be >= 1, got {self.c_h}")
        if not np.all(f_iso_prime(_Q_CHECK, self) > 0.0):
            raise ValueError(
                "inadmissible hardening: f_iso'(q) must stay positive on "
                "q in [0, 1.5]")

    @classmethod
    def from_dict(cls, d):
        """Build from a flat mapping with the JSON field names."""
        if "mu_f" not in d:
            raise ValueError("missing required parameter: mu_f")
        kwargs = {field: float(d[key])
                  for key, field in _EP_FIELD_BY_KEY.items() if key in d}
        return cls(**kwargs)

    def to_dict(self):
        return {key: getattr(self, field)
                for key, field in _EP_FIELD_BY_KEY.items()}


@dataclass(frozen=True)
class HyperelasticParams:
    """Elastic stiffnesses outside the angle mechanism.

    ``eps_L`` is the tensile fabric stiffness (force/length); ``beta_n``,
    ``beta_g``, ``beta_tau`` the out-of-plane bending, in-plane bending and
    torsion stiffnesses (force times length).
    """

    eps_L: float = 0.0
    beta_n: float = 0.0
    beta_g: float = 0.0
    beta_tau: float = 0.0

    def __post_init__(self):
        for name in ("eps_L", "beta_n", "beta_g", "beta_tau"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")

    @classmethod
    def from_dict(cls, d):
        kwargs = {field: float(d[key])
                  for key, field in _HP_FIELD_BY_KEY.items() if key in d}
        return cls(**kwargs)

    def to_dict(self):
        return {key: getattr(self, field)
                for key, field in _HP_FIELD_BY_KEY.items()}


def params_from_dict(d):
    """Split a flat JSON-named mapping into the two parameter objects.

    Unknown keys raise ValueError so that typos in parameter files fail
    loudly instead of silently falling back to defaults.
    """
    unknown = set(d) - set(PARAM_JSON_KEYS)
    if unknown:
        raise ValueError(f"unknown parameter keys: {sorted(unknown)}")
    return ElastoplasticParams.from_dict(d), HyperelasticParams.from_dict(d)


def params_to_dict(ep, hp=None):
    """Flat JSON-named mapping for both parameter objects."""
    d = ep.to_dict()
    d.update((hp or HyperelasticParams()).to_dict())
    return {key: d[key] for key in PARAM_JSON_KEYS}


def load_params(path):
    """Read a JSON parameter file: returns (ElastoplasticParams, HyperelasticParams)."""
    with open(path, "r", encoding="utf-8") as fh:
        d = json.load(fh)
    return params_from_dict(d)


def save_params(path, ep, hp=None):
    """Write both parameter objects to a JSON file with the flat field names."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(params_to_dict(ep, hp), fh, indent=2, sort_keys=False)
        fh.write("\n")


def replace_params(ep, updates):
    """Copy of ``ep`` with JSON-named entries of ``updates`` replaced."""
    unknown = set(updates) - set(_EP_FIELD_BY_KEY)
    if unknown:
        raise ValueError(f"unknown elastoplastic parameter keys: {sorted(unknown)}")
    return replace(ep, **{_EP_FIELD_BY_KEY[k]: float(v)
                          for k, v in updates.items()})


@dataclass(frozen=True)
class PlasticState:
    """History at one material point: plastic angle, hardening variable,
    accumulated plastic slip.  ``q - alpha_p`` is invariant across steps
    since both grow by the same slip increment."""

    phi_p: float = 0.0
    q: float = 0.0
    alpha_p: float = 0.0

    def __post_init__(self):
        if self.q < 0.0:
            raise ValueError(f"q must be >= 0, got {self.q}")
        if self.alpha_p < 0.0:
            raise ValueError(f"alpha_p must be >= 0, got {self.alpha_p}")


@dataclass(frozen=True)
class StressReturn:
    """Outcome of one return-map evaluation.

    ``tau = mu_f * phi_e`` holds exactly; ``new_state`` is the candidate
    history to commit after global convergence (the identical input object
    on an elastic step); ``dtau_dphi`` is the algorithmic tangent.
    """

    tau: float
    phi_e: float
    new_state: PlasticState
    dtau_dphi: float
    is_plastic: bool
    iterations: int = 0
    residual: float = 0.0


def _check_q(q):
    if np.any(np.asarray(q) < 0.0):
        raise ValueError("hardening variable q must be >= 0")


def f_iso(q, p):
    """Isotropic hardening stress at hardening variable q >= 0."""
    _check_q(q)
    return (p.tau_y
            + p.A_h * np.arcsinh(p.a_h * q)
            + p.B_h * np.tanh(p.b_h * q)
            + p.C_h * np.power(q, p.c_h))


def f_iso_prime(q, p):
    """Hardening modulus d f_iso / d q at q >= 0."""
    _check_q(q)
    return (p.A_h * p.a_h / np.sqrt(1.0 + (p.a_h * q) ** 2)
            + p.B_h * p.b_h / np.cosh(p.b_h * q) ** 2
            + p.C_h * p.c_h * np.power(q, p.c_h - 1.0))


def yield_function(tau, q, p):
    """Yield value |tau| - f_iso(q); negative means elastic."""
    return np.abs(tau) - f_iso(q, p)


def _f_iso_raw(q, p):
    # hardening stress without the domain check, for hot loops with q >= 0
    return (p.tau_y
            + p.A_h * np.arcsinh(p.a_h * q)
            + p.B_h * np.tanh(p.b_h * q)
            + p.C_h * np.power(q, p.c_h))


def _f_iso_prime_raw(q, p):
    return (p.A_h * p.a_h / np.sqrt(1.0 + (p.a_h * q) ** 2)
            + p.B_h * p.b_h / np.cosh(p.b_h * q) ** 2
            + p.C_h * p.c_h * np.power(q, p.c_h - 1.0))


def return_map_batch(phi_new, phi_p, q, alpha_p, p, tol=1e-12, max_iter=50):
    """Vectorized backward-Euler return map over independent points.

    Parameters
    ----------
    phi_new : (n,) array_like
        Total angle change at the end of the step.
    phi_p, q, alpha_p : (n,) array_like
        Committed history at the start of the step.
    p : ElastoplasticParams
    tol : float
        Residual tolerance, relative to max(mu_f, tau_y + f_iso(q)).
    max_iter : int
        Newton iteration cap; a bisection fallback keeps iterates inside
        the bracket (0, |phi_e_trial|), where the residual changes sign.

    Returns
    -------
    tau, phi_e, dtau_dphi, phi_p_new, q_new, alpha_p_new : (n,) ndarray
    plastic : (n,) bool ndarray
    iterations : int
        Newton sweeps used by the slowest point.
    residual : (n,) ndarray
        |g| at the accepted root (zero on elastic points).

    Raises
    ------
    ConvergenceError
        If any plastic point fails to reach tolerance.
    RuntimeError
        If a plastic step produces a nonpositive slip increment.
    """
    mu = p.mu_f
    phi_new = np.asarray(phi_new, dtype=float)
    phi_p = np.asarray(phi_p, dtype=float)
    q = np.asarray(q, dtype=float)
    alpha_p = np.asarray(alpha_p, dtype=float)

    phi_e = phi_new - phi_p          # trial elastic angle
    tau_tr = mu * phi_e
    h = np.where(tau_tr >= 0.0, 1.0, -1.0)
    f_tr = h * tau_tr - _f_iso_raw(q, p)
    plastic = f_tr > 0.0

    phi_e = phi_e.copy()
    dtau = np.full(phi_new.shape, mu)
    phi_p_new = phi_p.copy()
    q_new = q.copy()
    alpha_new = alpha_p.copy()
    residual = np.zeros(phi_new.shape)
    iterations = 0

    idx = np.nonzero(plastic)[0]
    if idx.size:
        hs = h[idx]
        ti = hs * tau_tr[idx]            # |tau_trial|
        te = np.abs(phi_e[idx])
        qi = q[idx]
        # root of g(x) = |tau_tr| - mu x - f_iso(q + x) lies in (0, te]:
        # g(0) = f_tr > 0 and g(te) = -f_iso(q + te) <= 0
        lo = np.zeros_like(ti)
        hi = te.copy()
        x = np.zeros_like(ti)
        g = f_tr[idx].copy()
        conv = np.zeros(idx.size, dtype=bool)
        for it in range(1, max_iter + 1):
            act = ~conv
            gp = -mu - _f_iso_prime_raw(qi + x, p)
            step = x - g / gp
            bad = ~np.isfinite(step) | (step <= lo) | (step > hi)
            step = np.where(bad, 0.5 * (lo + hi), step)
            x = np.where(act, step, x)
            g_new = ti - mu * x - _f_iso_raw(qi + x, p)
            g = np.where(act, g_new, g)
            scale = np.maximum(mu, p.tau_y + _f_iso_raw(qi + x, p))
            conv |= np.abs(g) <= tol * scale
            iterations = it
            if conv.all():
                break
            upd = ~conv
            lo = np.where(upd & (g > 0.0), x, lo)
            hi = np.where(upd & (g < 0.0), x, hi)
        if not conv.all():
            worst = float(np.abs(g[~conv]).max())
            raise ConvergenceError(
                f"return map failed to converge in {max_iter} iterations "
                f"(max |g| = {worst:.3e})", residual=worst)
        if (x <= 0.0).any():
            raise RuntimeError(
                "internal consistency violation: nonpositive plastic slip "
                "increment on a plastic step")
        phi_e[idx] = phi_e[idx] - hs * x
        gp = -mu - _f_iso_prime_raw(qi + x, p)
        dtau[idx] = mu + mu ** 2 / gp
        phi_p_new[idx] = phi_p[idx] + hs * x
        q_new[idx] = qi + x
        alpha_new[idx] = alpha_p[idx] + x
        residual[idx] = np.abs(g)

    tau = mu * phi_e
    return (tau, phi_e, dtau, phi_p_new, q_new, alpha_new, plastic,
            iterations, residual)


def return_map(phi_new, state_old, p, tol=1e-12, max_iter=50):
    """Backward-Euler return map at a single material point.

    Pure function: ``state_old`` is never mutated, and on an elastic step
    the returned result carries the identical state object.

    Parameters
    ----------
    phi_new : float
        Total angle change at the end of the step.
    state_old : PlasticState
        Committed history at the start of the step.
    p : ElastoplasticParams

    Returns
    -------
    StressReturn
    """
    out = return_map_batch(
        np.array([phi_new]), np.array([state_old.phi_p]),
        np.array([state_old.q]), np.array([state_old.alpha_p]),
        p, tol=tol, max_iter=max_iter)
    tau, phi_e, dtau, phi_p_new, q_new, alpha_new, plastic, iters, res = out
    if plastic[0]:
        new_state = PlasticState(phi_p=float(phi_p_new[0]), q=float(q_new[0]),
                                 alpha_p=float(alpha_new[0]))
    else:
        new_state = state_old
    return StressReturn(tau=float(tau[0]), phi_e=float(phi_e[0]),
                        new_state=new_state, dtau_dphi=float(dtau[0]),
                        is_plastic=bool(plastic[0]), iterations=iters,
                        residual=float(res[0]))


def angle_stress_and_tangent(sr, st):
    """Angle contribution to membrane stress and material tangent.

    Parameters
    ----------
    sr : StressReturn
    st : StructuralTensors
        From the same kinematic point the return map was driven with.

    Returns
    -------
    tau_a : (2, 2) ndarray
        Contravariant stress components ``2 tau g12``.
    c_a : (2, 2, 2, 2) ndarray
        Consistent tangent ``4 mu_eff g12 (x) g12 + 4 tau g12_grad`` with
        ``mu_eff = sr.dtau_dphi``.
    """
    tau_a = 2.0 * sr.tau * st.g12
    c_a = (4.0 * sr.dtau_dphi * np.einsum("ab,gd->abgd", st.g12, st.g12)
           + 4.0 * sr.tau * st.g12_grad)
    return tau_a, c_a


def membrane_stress(m, f, sr, st, hp):
    """Total membrane stress and tangent: fiber stretch plus angle parts.

    Returns
    -------
    tau_total : (2, 2) ndarray
    c_total : (2, 2, 2, 2) ndarray
    """
    tau_a, c_a = angle_stress_and_tangent(sr, st)
    if hp.eps_L == 0.0:
        return tau_a, c_a
    fs = fiber_state(m, f)
    L1L1 = np.outer(f.L1, f.L1)
    L2L2 = np.outer(f.L2, f.L2)
    tau_total = tau_a + hp.eps_L * (
        (fs.lambda1 - 1.0) / fs.lambda1 * L1L1
        + (fs.lambda2 - 1.0) / fs.lambda2 * L2L2)
    c_total = c_a + hp.eps_L * (
        fs.lambda1 ** -3 * np.einsum("ab,gd->abgd", L1L1, L1L1)
        + fs.lambda2 ** -3 * np.einsum("ab,gd->abgd", L2L2, L2L2))
    return tau_total, c_total


@dataclass(frozen=True, eq=False)
class BendingResponse:
    """Moments conjugate to the two curvature forms and their tangents.

    The cross tangents between the normal and geodesic curvature forms
    vanish for this quadratic energy, so only the diagonal blocks appear.
    """

    M0: np.ndarray
    Mbar0: np.ndarray
    f_tan: np.ndarray
    fbar_tan: np.ndarray


def moments_and_bending_tangents(m, f, c, hp):
    """Elastic bending/twist moments at a material point.

    Quadratic energy in the per-fiber normal-curvature, geodesic-curvature
    and twist invariants; state-free.
    """
    L = np.stack([f.L1, f.L2])
    c0 = np.asarray(c.c0, dtype=float).reshape(2, 2)
    LL = np.einsum("ia,ib->iab", L, L)
    K_n = np.einsum("ia,ab,ib->i", L, c.b_ab - c.B_ab, L)
    K_g = np.einsum("ia,ab,ib->i", L, c.bbar_ab - c.Bbar_ab, L)
    T_g = (np.einsum("ia,ab,ib->i", c0, c.b_ab, L)
           - np.einsum("ia,ab,ib->i", L, c.B_ab, c0))
    cL = 0.5 * (np.einsum("ia,ib->iab", c0, L) + np.einsum("ia,ib->iab", L, c0))
    M0 = (hp.beta_n * np.einsum("i,iab->ab", K_n, LL)
          + hp.beta_tau * np.einsum("i,iab->ab", T_g, cL))
    Mbar0 = hp.beta_g * np.einsum("i,iab->ab", K_g, LL)
    f_tan = (hp.beta_n * np.einsum("iab,igd->abgd", LL, LL)
             + hp.beta_tau * np.einsum("iab,igd->abgd", cL, cL))
    fbar_tan = hp.beta_g * np.einsum("iab,igd->abgd", LL, LL)
    return BendingResponse(M0=M0, Mbar0=Mbar0, f_tan=f_tan, fbar_tan=fbar_tan)


def strain_energy(m, f, c, phi_e, hp, ep):
    """Stored energy per reference area at a material point.

    Quadratic in the fiber stretches, the elastic angle change, and (when
    curvature data is given) the bending/twist invariants.  Nonnegative by
    construction.
    """
    fs = fiber_state(m, f)
    W = 0.5 * hp.eps_L * ((fs.lambda1 - 1.0) ** 2 + (fs.lambda2 - 1.0) ** 2)
    W += 0.5 * ep.mu_f * phi_e ** 2
    if c is not None:
        L = np.stack([f.L1, f.L2])
        c0 = np.asarray(c.c0, dtype=float).reshape(2, 2)
        K_n = np.einsum("ia,ab,ib->i", L, c.b_ab - c.B_ab, L)
        K_g = np.einsum("ia,ab,ib->i", L, c.bbar_ab - c.Bbar_ab, L)
        T_g = (np.einsum("ia,ab,ib->i", c0, c.b_ab, L)
               - np.einsum("ia,ab,ib->i", L, c.B_ab, c0))
        W += 0.5 * (hp.beta_n * np.sum(K_n ** 2) + hp.beta_g * np.sum(K_g ** 2)
                    + hp.beta_tau * np.sum(T_g ** 2))
    return float(W)


@dataclass(frozen=True, eq=False)
class DriveResult:
    """History arrays produced by the incremental angle driver."""

    phi: np.ndarray
    tau: np.ndarray
    phi_e: np.ndarray
    phi_p: np.ndarray
    q: np.ndarray
    state_final: PlasticState


def drive_angle_path(phi_path, p, state=None, tol=1e-12, max_iter=50):
    """Drive a material point through a prescribed angle-change path.

    Each entry of ``phi_path`` is one committed step; states are committed
    in order, so the result is the backward-Euler time discretization of
    the path.

    Parameters
    ----------
    phi_path : (n,) array_like
        Total angle change at the end of each step.
    p : ElastoplasticParams
    state : PlasticState, optional
        Starting history (virgin by default).

    Returns
    -------
    DriveResult
    """
    phi_path = np.asarray(phi_path, dtype=float)
    if state is None:
        state = PlasticState()
    n = phi_path.size
    tau = np.empty(n)
    phi_p = np.empty(n)
    q = np.empty(n)
    for k, phi in enumerate(phi_path):
        sr = return_map(float(phi), state, p, tol=tol, max_iter=max_iter)
        state = sr.new_state
        tau[k] = sr.tau
        phi_p[k] = state.phi_p
        q[k] = state.q
    phi_e = phi_path - phi_p
    return DriveResult(phi=phi_path.copy(), tau=tau, phi_e=phi_e,
                       phi_p=phi_p, q=q, state_final=state)
