"""Smooth hysteresis laws of the Bouc-Wen family.

Three variants of the evolution law for the dimensionless hysteretic
variable z are provided as pure rate functions:

* ``bouc_wen_rate``    classic non-degrading law,
* ``baber_wen_rate``   strength/stiffness degradation driven by dissipated
                       hysteretic energy e,
* ``pinching_rate``    degradation plus a pinching window h(z, e).

All functions accept scalars or numpy arrays for the state and velocity
(and broadcast over array-valued parameters), so the same code serves a
single element and a batch of elements or realizations.  Rates are exact
algebraic expressions; time integration lives in :mod:`hysterid.simulate`.

Sign conventions: ``numpy.sign`` is used for sgn(v), so sgn(0) = 0, and
``|z|**(n-1)`` evaluates to 1 at z = 0 when n = 1 (0**0 = 1), which keeps
the rate continuous in the common linear-exponent case.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DegenerateStateError",
    "BoucWenParams",
    "BaberWenParams",
    "PinchingParams",
    "HystereticState",
    "bouc_wen_rate",
    "degradation_shapes",
    "baber_wen_rate",
    "pinching_shape",
    "pinching_rate",
    "energy_rate",
    "hysteretic_rate",
]


class DegenerateStateError(ValueError):
    """Raised when a degradation shape makes the law ill posed (eta <= 0, zeta_2 = 0)."""


def _check_finite(**named):
    for name, value in named.items():
        if not np.all(np.isfinite(value)):
            raise ValueError(f"non-finite value in '{name}'")


def _check_positive(**named):
    for name, value in named.items():
        if not np.all(np.asarray(value) > 0.0):
            raise ValueError(f"'{name}' must be positive")


def _check_nonnegative(**named):
    for name, value in named.items():
        if not np.all(np.asarray(value) >= 0.0):
            raise ValueError(f"'{name}' must be nonnegative")


@dataclass(frozen=True)
class BoucWenParams:
    """Constants of the classic law  z' = A v - beta v |z|^n - gamma z |v| |z|^(n-1).

    Fields may be scalars or broadcastable arrays (one entry per element).
    """

    A: float
    beta: float
    gamma: float
    n_pow: float = 1.0

    def __post_init__(self):
        _check_finite(A=self.A, beta=self.beta, gamma=self.gamma, n_pow=self.n_pow)
        _check_positive(A=self.A)
        _check_nonnegative(beta=self.beta, gamma=self.gamma)
        if not np.all(np.asarray(self.n_pow) >= 1.0):
            raise ValueError("n_pow must be >= 1")

    @classmethod
    def consistent(cls, k_pre, q_yield, n_pow=1.0, **extra):
        """Constants A = 2 beta = 2 gamma = k_pre / q_yield.

        This choice makes the pre-yield tangent of the scaled restoring force
        q_yield * z equal to k_pre and, for n_pow = 1, saturates z at +-1.
        Extra keyword fields pass through to subclasses.
        """
        _check_positive(k_pre=k_pre, q_yield=q_yield)
        a_const = np.asarray(k_pre, dtype=float) / np.asarray(q_yield, dtype=float)
        if a_const.ndim == 0:
            a_const = float(a_const)
        return cls(A=a_const, beta=a_const / 2.0, gamma=a_const / 2.0,
                   n_pow=n_pow, **extra)


@dataclass(frozen=True)
class BaberWenParams(BoucWenParams):
    """Bouc-Wen constants plus energy-driven degradation slopes.

    A_bar = A (1 - delta_A e),  nu = 1 + delta_nu e,  eta = 1 + delta_eta e.
    All three slopes default to zero (no degradation).
    """

    delta_A: float = 0.0
    delta_nu: float = 0.0
    delta_eta: float = 0.0

    def __post_init__(self):
        super().__post_init__()
        _check_finite(delta_A=self.delta_A, delta_nu=self.delta_nu,
                      delta_eta=self.delta_eta)
        _check_nonnegative(delta_A=self.delta_A, delta_nu=self.delta_nu,
                           delta_eta=self.delta_eta)


@dataclass(frozen=True)
class PinchingParams(BaberWenParams):
    """Degrading constants plus the pinching window parameters.

    zeta_s   in [0, 1): severity ceiling of the pinch (0 disables pinching),
    p        rate at which the pinch develops with dissipated energy,
    q        fraction of the ultimate z locating the pinch center,
    psi      base spread of the pinch window,
    delta_psi spread growth per unit energy,
    lam      constant contribution to the spread scale.

    Defaults are a commonly used moderate-pinching set.
    """

    zeta_s: float = 0.5
    p: float = 1.0
    q: float = 0.5
    psi: float = 0.25
    delta_psi: float = 0.15
    lam: float = 0.5

    def __post_init__(self):
        super().__post_init__()
        _check_finite(zeta_s=self.zeta_s, p=self.p, q=self.q, psi=self.psi,
                      delta_psi=self.delta_psi, lam=self.lam)
        if not (np.all(np.asarray(self.zeta_s) >= 0.0)
                and np.all(np.asarray(self.zeta_s) < 1.0)):
            raise ValueError("zeta_s must lie in [0, 1)")
        _check_positive(psi=self.psi)
        _check_nonnegative(p=self.p, q=self.q, delta_psi=self.delta_psi,
                           lam=self.lam)


@dataclass(frozen=True)
class HystereticState:
    """Hysteretic displacement z and dissipated-energy coordinate e."""

    z: float
    e: float = 0.0

    def __post_init__(self):
        _check_finite(z=self.z, e=self.e)


def _abs_pow_terms(z, n_pow):
    """Return (|z|^(n-1), |z|^n) with the 0**0 = 1 convention."""
    abs_z = np.abs(z)
    azn1 = abs_z ** (np.asarray(n_pow) - 1.0)
    return azn1, azn1 * abs_z


def bouc_wen_rate(params, z, v):
    """Classic rate  z' = A v - beta v |z|^n - gamma z |v| |z|^(n-1)."""
    _check_finite(z=z, v=v)
    azn1, azn = _abs_pow_terms(z, params.n_pow)
    return params.A * v - params.beta * v * azn - params.gamma * z * np.abs(v) * azn1


def degradation_shapes(params, e):
    """Energy-dependent shapes (A_bar, nu, eta) of the degrading law.

    Raises DegenerateStateError if any eta is not strictly positive.
    """
    _check_finite(e=e)
    a_bar = params.A * (1.0 - params.delta_A * e)
    nu = 1.0 + params.delta_nu * e
    eta = 1.0 + params.delta_eta * e
    if not np.all(eta > 0.0):
        raise DegenerateStateError("eta <= 0: degradation shapes are degenerate")
    return a_bar, nu, eta


def baber_wen_rate(params, state, v):
    """Degrading rate  z' = (1/eta) [A_bar v - nu (beta v |z|^n + gamma z |v| |z|^(n-1))]."""
    z, e = state.z, state.e
    _check_finite(z=z, e=e, v=v)
    a_bar, nu, eta = degradation_shapes(params, e)
    azn1, azn = _abs_pow_terms(z, params.n_pow)
    inner = params.beta * v * azn + params.gamma * z * np.abs(v) * azn1
    return (a_bar * v - nu * inner) / eta


def pinching_shape(params, state, v):
    """Pinching window h(z, e, sgn v) in (1 - zeta_s, 1].

    h = 1 - zeta_1(e) exp(-(z sgn(v) - q z_u)^2 / zeta_2(e)^2) with
    zeta_1 = zeta_s (1 - exp(-p e)), zeta_2 = (psi + delta_psi e)(lam + zeta_1)
    and z_u = [nu (beta + gamma)]^(-1/n).
    """
    z, e = state.z, state.e
    _check_finite(z=z, e=e, v=v)
    _, nu, _ = degradation_shapes(params, e)
    scale = nu * (params.beta + params.gamma)
    if not np.all(scale > 0.0):
        raise DegenerateStateError("nu (beta + gamma) must be positive for z_u")
    z_u = scale ** (-1.0 / params.n_pow)
    zeta_1 = params.zeta_s * (1.0 - np.exp(-params.p * e))
    zeta_2 = (params.psi + params.delta_psi * e) * (params.lam + zeta_1)
    if not np.all(zeta_2 != 0.0):
        raise DegenerateStateError("zeta_2 = 0: pinching window is degenerate")
    arg = (z * np.sign(v) - params.q * z_u) / zeta_2
    return 1.0 - zeta_1 * np.exp(-arg * arg)


def pinching_rate(params, state, v):
    """Pinching rate  z' = h(z, e) / eta [A_bar v - nu (beta v |z|^n + gamma z |v| |z|^(n-1))].

    The bracket is the degrading rate (A_bar, nu, eta all evolve with e), so
    zeta_s = 0 collapses this law to the degrading one exactly; pinching
    enters only through the window h.
    """
    z, e = state.z, state.e
    h = pinching_shape(params, state, v)
    a_bar, nu, eta = degradation_shapes(params, e)
    azn1, azn = _abs_pow_terms(z, params.n_pow)
    inner = params.beta * v * azn + params.gamma * z * np.abs(v) * azn1
    return h * (a_bar * v - nu * inner) / eta


def energy_rate(z, v):
    """Rate of the dissipated-energy coordinate, e' = z v."""
    _check_finite(z=z, v=v)
    return z * v


def hysteretic_rate(law, params, z, e, v):
    """Dispatch on the law name: 'bouc_wen', 'baber_wen' or 'pinching'."""
    if law == "bouc_wen":
        return bouc_wen_rate(params, z, v)
    state = HystereticState(z=z, e=e)
    if law == "baber_wen":
        return baber_wen_rate(params, state, v)
    if law == "pinching":
        return pinching_rate(params, state, v)
    raise ValueError(f"unknown hysteresis law '{law}'")
