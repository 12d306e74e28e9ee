"""Builders for the benchmark MDOF systems with hysteretic elements.

Three families of models are assembled here as plain mass/damping/stiffness
matrices plus a list of hysteretic attachments:

* a 4-DOF base-isolated shear structure (three stories on a hysteretic
  isolation layer),
* half-car and quarter-car vertical suspension models with degrading
  hysteretic suspension elements,
* an n-story base-isolated shear building with optional corrosion-degraded
  superstructure.

All coordinates are relative to the ground (stories and base alike for the
isolated structures; absolute vertical displacements for the cars).  The
hysteretic force of element j enters the equations of motion as
scale_j * z_j * incidence_j, where incidence_j also defines the drive
velocity v_j = incidence_j . u_dot of the evolution law.

Uncertain parameters are described by small distribution objects
(:class:`Lognormal`, :class:`Uniform`, :class:`TruncatedGaussian`) and drawn
with :func:`sample_uncertain`.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .hysteresis import BaberWenParams, PinchingParams

GRAVITY = 9.81  # m/s^2

__all__ = [
    "GRAVITY",
    "Lognormal",
    "Uniform",
    "TruncatedGaussian",
    "sample_uncertain",
    "HystereticElement",
    "MdofSystem",
    "RayleighDamping",
    "rayleigh_coefficients",
    "CorrosionModel",
    "corrosion_loss",
    "stiffness_retention",
    "CarConstants",
    "CAR_DEFAULTS",
    "build_4dof",
    "build_half_car",
    "build_quarter_car",
    "build_shear_building",
    "FOURDOF_UNCERTAIN",
    "CAR_UNCERTAIN",
    "BUILDING_UNCERTAIN",
    "FOURDOF_DEGRADATION",
    "FOURDOF_PINCHING",
]


# ---------------------------------------------------------------------------
# marginal distributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Lognormal:
    """Lognormal given the mean and sd of the variable itself.

    The underlying normal parameters follow from moment matching:
    mu = ln(m^2 / sqrt(m^2 + s^2)), sigma^2 = ln(1 + s^2/m^2).
    """

    mean: float
    sd: float

    def __post_init__(self):
        if not (self.mean > 0 and self.sd > 0):
            raise ValueError("lognormal mean and sd must be positive")

    def underlying(self):
        m2 = self.mean * self.mean
        s2 = self.sd * self.sd
        mu = np.log(m2 / np.sqrt(m2 + s2))
        sigma = np.sqrt(np.log(1.0 + s2 / m2))
        return mu, sigma

    def sample(self, rng, size=None):
        mu, sigma = self.underlying()
        return rng.lognormal(mu, sigma, size)

    @property
    def mean_value(self):
        return self.mean


@dataclass(frozen=True)
class Uniform:
    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError("uniform requires lower < upper")

    def sample(self, rng, size=None):
        return rng.uniform(self.lower, self.upper, size)

    @property
    def mean_value(self):
        return 0.5 * (self.lower + self.upper)

    @property
    def sd_value(self):
        return (self.upper - self.lower) / np.sqrt(12.0)


@dataclass(frozen=True)
class TruncatedGaussian:
    """Gaussian truncated below at `lower` by rejection sampling."""

    mean: float
    sd: float
    lower: float = 0.0

    def __post_init__(self):
        if not self.sd > 0:
            raise ValueError("truncated gaussian sd must be positive")
        if self.lower >= self.mean + 10 * self.sd:
            raise ValueError("truncation bound leaves negligible mass")

    def sample(self, rng, size=None):
        out = rng.normal(self.mean, self.sd, size)
        scalar = np.ndim(out) == 0
        out = np.atleast_1d(out)
        bad = out < self.lower
        while np.any(bad):
            out[bad] = rng.normal(self.mean, self.sd, int(bad.sum()))
            bad = out < self.lower
        return float(out[0]) if scalar else out

    @property
    def mean_value(self):
        return self.mean


def sample_uncertain(spec, seed, count):
    """Draw `count` i.i.d. realizations of every distribution in `spec`.

    Args:
        spec: dict mapping parameter name to a distribution object.
        seed: int, SeedSequence or Generator; draws are deterministic for a
            fixed seed and fixed key order.
        count: number of realizations.

    Returns:
        dict mapping parameter name to an array of shape (count,).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    return {name: np.asarray(dist.sample(rng, count), dtype=float)
            for name, dist in spec.items()}


# ---------------------------------------------------------------------------
# system container
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HystereticElement:
    """A scaled hysteretic force between DOFs.

    The force on the structure is scale * z * incidence and the element is
    driven by v = incidence . u_dot.  `params` carries the full constant set;
    which evolution law reads it (classic, degrading, pinching) is chosen at
    assembly time.
    """

    params: BaberWenParams
    incidence: np.ndarray
    scale: float

    def __post_init__(self):
        object.__setattr__(self, "incidence",
                           np.asarray(self.incidence, dtype=float))
        if self.incidence.ndim != 1:
            raise ValueError("incidence must be a 1-D vector")
        if not np.isfinite(self.scale):
            raise ValueError("non-finite force scale")


def _check_symmetric(name, mat, rtol=1e-12):
    scale = np.abs(mat).max()
    if scale > 0 and np.abs(mat - mat.T).max() > rtol * scale:
        raise ValueError(f"{name} matrix is not symmetric")


@dataclass(frozen=True)
class MdofSystem:
    """Assembled M, C, K plus hysteretic elements and excitation mapping.

    excitation_map (n x n_w) converts the excitation channels (ground
    acceleration, road elevations, ...) into nodal forces: w(t) = map @ channels.
    """

    M: np.ndarray
    C: np.ndarray
    K: np.ndarray
    elements: tuple
    excitation_map: np.ndarray
    labels: tuple = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("M", "C", "K", "excitation_map"):
            object.__setattr__(self, name,
                               np.asarray(getattr(self, name), dtype=float))
        n = self.M.shape[0]
        if self.M.shape != (n, n) or self.C.shape != (n, n) or self.K.shape != (n, n):
            raise ValueError("M, C, K must be square and of equal size")
        if self.excitation_map.ndim != 2 or self.excitation_map.shape[0] != n:
            raise ValueError("excitation_map must have one row per DOF")
        _check_symmetric("M", self.M)
        _check_symmetric("C", self.C)
        _check_symmetric("K", self.K)
        try:
            np.linalg.cholesky(self.M)
        except np.linalg.LinAlgError:
            raise ValueError("M must be positive definite") from None
        for el in self.elements:
            if el.incidence.shape != (n,):
                raise ValueError("element incidence length must match DOF count")
        object.__setattr__(self, "elements", tuple(self.elements))
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def n_dof(self):
        return self.M.shape[0]

    @property
    def n_elements(self):
        return len(self.elements)

    def hysteretic_influence(self):
        """n x n_g matrix of force columns scale_j * incidence_j."""
        if not self.elements:
            return np.zeros((self.n_dof, 0))
        return np.column_stack([el.scale * el.incidence for el in self.elements])


# ---------------------------------------------------------------------------
# Rayleigh damping
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RayleighDamping:
    """C = beta1 M + beta2 K anchored to `damping_ratio` at two modes."""

    beta1: float
    beta2: float
    mode_indices: tuple
    damping_ratio: float


def rayleigh_coefficients(M, K, mode_indices=(1, 2), damping_ratio=0.03):
    """Fit beta1, beta2 so the given modes (1-based) damp at `damping_ratio`.

    Natural frequencies come from the generalized eigenproblem K phi = w^2 M phi;
    the pair solves ratio = beta1/(2 w) + beta2 w / 2 at both anchors.
    """
    i, j = mode_indices
    if i == j:
        raise ValueError("mode_indices must be distinct")
    eigvals = scipy.linalg.eigh(K, M, eigvals_only=True)
    if np.any(eigvals <= 0):
        raise ValueError("K must be positive definite for frequency extraction")
    omega = np.sqrt(eigvals)
    w_i, w_j = omega[i - 1], omega[j - 1]
    beta2 = 2.0 * damping_ratio / (w_i + w_j)
    beta1 = beta2 * w_i * w_j
    return RayleighDamping(beta1=beta1, beta2=beta2,
                           mode_indices=(i, j), damping_ratio=damping_ratio)


# ---------------------------------------------------------------------------
# corrosion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CorrosionModel:
    """Power-law corrosion penetration d = B1 * t^B2 (micrometers, years)."""

    B1: float = 80.2
    B2: float = 0.59
    t_years: float = 50.0

    def __post_init__(self):
        if not (self.B1 > 0 and self.B2 > 0):
            raise ValueError("B1 and B2 must be positive")
        if self.t_years < 0:
            raise ValueError("t_years must be nonnegative")


def corrosion_loss(model):
    """Penetration depth in micrometers after model.t_years of exposure."""
    return model.B1 * model.t_years ** model.B2


def stiffness_retention(d_loss_um, t_ref_mm=10.0):
    """Bending-stiffness retention for a uniform thickness loss.

    A plate-like section of reference thickness t_ref losing d_loss from its
    surface keeps (1 - d/t_ref)^3 of its flexural stiffness (I ~ t^3) and
    (1 - d/t_ref) of its area.  Returns the cubic stiffness factor.
    """
    x = d_loss_um / (t_ref_mm * 1000.0)
    if not 0.0 <= x < 1.0:
        raise ValueError("thickness loss must be inside [0, t_ref)")
    return (1.0 - x) ** 3


# ---------------------------------------------------------------------------
# shared chain assembly
# ---------------------------------------------------------------------------

def _chain_matrices(masses, stiffnesses):
    """Fixed-base shear chain: diagonal M and tridiagonal K."""
    masses = np.asarray(masses, dtype=float)
    ks = np.asarray(stiffnesses, dtype=float)
    n = masses.size
    if ks.size != n:
        raise ValueError("need one story stiffness per story mass")
    if np.any(masses <= 0) or np.any(ks <= 0):
        raise ValueError("story masses and stiffnesses must be positive")
    M = np.diag(masses)
    K = np.zeros((n, n))
    for s in range(n):
        K[s, s] += ks[s]
        if s + 1 < n:
            K[s, s] += ks[s + 1]
            K[s, s + 1] -= ks[s + 1]
            K[s + 1, s] -= ks[s + 1]
    return M, K


def _isolated_assembly(M_s, C_s, K_s, m_b, c_b, k_b):
    """Couple a superstructure chain to a base DOF, all relative to ground.

    Story springs and dampers act on drifts relative to the base, which in
    ground-relative coordinates puts -C_s 1 and -K_s 1 couplings in the base
    row/column and their column sums on the base diagonal.
    """
    n_s = M_s.shape[0]
    ones = np.ones(n_s)
    n = n_s + 1
    M = np.zeros((n, n))
    C = np.zeros((n, n))
    K = np.zeros((n, n))
    M[0, 0] = m_b
    M[1:, 1:] = M_s
    C[0, 0] = c_b + ones @ C_s @ ones
    C[0, 1:] = -(C_s @ ones)
    C[1:, 0] = -(C_s @ ones)
    C[1:, 1:] = C_s
    K[0, 0] = k_b + ones @ K_s @ ones
    K[0, 1:] = -(K_s @ ones)
    K[1:, 0] = -(K_s @ ones)
    K[1:, 1:] = K_s
    return M, C, K


def _require(xi, *names):
    missing = [n for n in names if n not in xi]
    if missing:
        raise ValueError(f"missing uncertain parameters: {missing}")
    return [float(xi[n]) for n in names]


# ---------------------------------------------------------------------------
# example 1: 4-DOF base-isolated structure
# ---------------------------------------------------------------------------

FOURDOF_STORY_MASS = 300.0e3      # kg, three identical stories
FOURDOF_STORY_STIFFNESS = 40.0e6  # N/m
FOURDOF_BASE_MASS = 500.0e3       # kg

FOURDOF_UNCERTAIN = {
    "k_post": Lognormal(4.0e6, 0.25e6),   # N/m
    "c_b": Lognormal(20.0e6, 4.0e6),      # N s/m
    "r_k": Uniform(0.15, 0.17),           # post/pre yield stiffness ratio
    "q_y_pct": Uniform(4.0, 6.0),         # yield force, % of total weight
}

# degradation and pinching constants of the 4-DOF benchmark
FOURDOF_DEGRADATION = dict(delta_A=0.6, delta_nu=0.02, delta_eta=0.02)
FOURDOF_PINCHING = dict(zeta_s=0.5, p=1.0, q=0.5, psi=0.25,
                        delta_psi=0.15, lam=0.5)


def build_4dof(xi, zeta_s=None):
    """Three-story shear structure on a hysteretic isolation layer.

    Args:
        xi: mapping with k_post (N/m), c_b (N s/m), r_k, q_y_pct.
        zeta_s: optional override of the pinching severity (the other
            pinching/degradation constants are the fixed benchmark set).

    The isolator force is k_post * u_b (elastic, in K) plus q_y * z with
    q_y = Q_y (1 - r_k), which gives pre-yield tangent k_pre = k_post / r_k
    and force Q_y at the yield displacement for the consistent constants
    A = 2 beta = 2 gamma = k_pre / Q_y.
    """
    k_post, c_b, r_k, q_y_pct = _require(xi, "k_post", "c_b", "r_k", "q_y_pct")
    if not 0.0 < r_k < 1.0:
        raise ValueError("r_k must lie in (0, 1)")
    if k_post <= 0 or c_b <= 0 or q_y_pct <= 0:
        raise ValueError("k_post, c_b and q_y_pct must be positive")

    masses = [FOURDOF_STORY_MASS] * 3
    stiffs = [FOURDOF_STORY_STIFFNESS] * 3
    M_s, K_s = _chain_matrices(masses, stiffs)
    ray = rayleigh_coefficients(M_s, K_s, mode_indices=(1, 2), damping_ratio=0.03)
    C_s = ray.beta1 * M_s + ray.beta2 * K_s

    M, C, K = _isolated_assembly(M_s, C_s, K_s,
                                 FOURDOF_BASE_MASS, c_b, k_post)

    total_mass = FOURDOF_BASE_MASS + sum(masses)
    q_yield = q_y_pct / 100.0 * total_mass * GRAVITY
    k_pre = k_post / r_k
    pinching = dict(FOURDOF_PINCHING)
    if zeta_s is not None:
        pinching["zeta_s"] = float(zeta_s)
    params = PinchingParams.consistent(k_pre, q_yield, n_pow=1.0,
                                       **FOURDOF_DEGRADATION, **pinching)
    n = 4
    incidence = np.zeros(n)
    incidence[0] = 1.0
    element = HystereticElement(params=params, incidence=incidence,
                                scale=q_yield * (1.0 - r_k))

    # single channel: ground acceleration, force = -M 1 a_g
    exc_map = (-M @ np.ones(n)).reshape(n, 1)
    return MdofSystem(M=M, C=C, K=K, elements=(element,),
                      excitation_map=exc_map,
                      labels=("u_b", "u_1", "u_2", "u_3"),
                      meta={"kind": "4dof", "rayleigh": ray,
                            "k_pre": k_pre, "q_yield": q_yield})


# ---------------------------------------------------------------------------
# example 2: half-car and quarter-car suspension models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CarConstants:
    M_b: float = 1794.40      # kg, car body
    I_b: float = 34430.50     # kg m^2
    m_wf: float = 87.15       # kg, front wheel
    m_wr: float = 140.14      # kg, rear wheel
    c_bf: float = 1190.0      # N s/m
    c_br: float = 1000.0      # N s/m
    L_f: float = 1.27         # m
    L_r: float = 1.72         # m
    velocity: float = 20.0    # m/s

    @property
    def wheelbase(self):
        return self.L_f + self.L_r


CAR_DEFAULTS = CarConstants()

CAR_UNCERTAIN = {
    "k_bf": Lognormal(66824.0, 6682.4),
    "k_br": Lognormal(18615.0, 1861.5),
    "k_wf": Lognormal(101115.0, 10111.5),
    # documented deviation: the printed sd equals the mean; a 10% cov like
    # every other suspension row is used instead
    "k_wr": Lognormal(10111.5, 1011.15),
    "r_k": Uniform(0.125, 0.250),
}

CAR_DEGRADATION = dict(delta_A=0.02, delta_nu=0.02, delta_eta=0.02)
CAR_YIELD_PCT = 1.5  # % of (body + wheel) weight


def _suspension_element(k_b, r_k, wheel_mass, incidence, car):
    """Degrading suspension element: n_pow = 2, consistent constants."""
    q_yield = CAR_YIELD_PCT / 100.0 * (car.M_b + wheel_mass) * GRAVITY
    k_pre = r_k * k_b
    params = BaberWenParams.consistent(k_pre, q_yield, n_pow=2.0,
                                       **CAR_DEGRADATION)
    return HystereticElement(params=params, incidence=incidence,
                             scale=q_yield * (1.0 - r_k))


def build_half_car(xi, car=CAR_DEFAULTS):
    """Half-car model: body heave and pitch plus two wheel hops (4 DOF).

    DOF order [u_c, theta_c, u_wf, u_wr].  Excitation channels are the two
    road elevations (front, rear); the map multiplies them by the tyre
    stiffnesses to produce wheel forces.
    """
    k_bf, k_br, k_wf, k_wr, r_k = _require(
        xi, "k_bf", "k_br", "k_wf", "k_wr", "r_k")
    if not 0.0 < r_k < 1.0:
        raise ValueError("r_k must lie in (0, 1)")
    for name, val in (("k_bf", k_bf), ("k_br", k_br),
                      ("k_wf", k_wf), ("k_wr", k_wr)):
        if val <= 0:
            raise ValueError(f"{name} must be positive")

    c_bf, c_br = car.c_bf, car.c_br
    L_f, L_r = car.L_f, car.L_r
    M = np.diag([car.M_b, car.I_b, car.m_wf, car.m_wr])
    C = np.array([
        [c_bf + c_br, c_bf * L_f - c_br * L_r, -c_bf, -c_br],
        [c_bf * L_f - c_br * L_r, c_bf * L_f**2 + c_br * L_r**2,
         -c_bf * L_f, c_br * L_r],
        [-c_bf, -c_bf * L_f, c_bf, 0.0],
        [-c_br, c_br * L_r, 0.0, c_br],
    ])
    K = np.array([
        [k_bf + k_br, k_bf * L_f - k_br * L_r, -k_bf, -k_br],
        [k_bf * L_f - k_br * L_r, k_bf * L_f**2 + k_br * L_r**2,
         -k_bf * L_f, k_br * L_r],
        [-k_bf, -k_bf * L_f, k_bf + k_wf, 0.0],
        [-k_br, k_br * L_r, 0.0, k_br + k_wr],
    ])
    front = _suspension_element(k_bf, r_k, car.m_wf,
                                [1.0, L_f, -1.0, 0.0], car)
    rear = _suspension_element(k_br, r_k, car.m_wr,
                               [1.0, -L_r, 0.0, -1.0], car)
    exc_map = np.array([[0.0, 0.0],
                        [0.0, 0.0],
                        [k_wf, 0.0],
                        [0.0, k_wr]])
    return MdofSystem(M=M, C=C, K=K, elements=(front, rear),
                      excitation_map=exc_map,
                      labels=("u_c", "theta_c", "u_wf", "u_wr"),
                      meta={"kind": "half_car", "car": car})


def build_quarter_car(xi, car=CAR_DEFAULTS):
    """Front half of the car with the full body mass retained (2 DOF)."""
    k_bf, k_wf, r_k = _require(xi, "k_bf", "k_wf", "r_k")
    if not 0.0 < r_k < 1.0:
        raise ValueError("r_k must lie in (0, 1)")
    if k_bf <= 0 or k_wf <= 0:
        raise ValueError("stiffnesses must be positive")

    c_bf = car.c_bf
    M = np.diag([car.M_b, car.m_wf])
    C = np.array([[c_bf, -c_bf], [-c_bf, c_bf]])
    K = np.array([[k_bf, -k_bf], [-k_bf, k_bf + k_wf]])
    front = _suspension_element(k_bf, r_k, car.m_wf, [1.0, -1.0], car)
    exc_map = np.array([[0.0], [k_wf]])
    return MdofSystem(M=M, C=C, K=K, elements=(front,),
                      excitation_map=exc_map,
                      labels=("u_c", "u_wf"),
                      meta={"kind": "quarter_car", "car": car})


# ---------------------------------------------------------------------------
# example 3: n-story base-isolated shear building with corrosion
# ---------------------------------------------------------------------------

BUILDING_UNCERTAIN = {
    "k_post": Lognormal(750.0e3, 20.0e3),          # N/m
    "c_b": TruncatedGaussian(35.0e3, 2.5e3),       # N s/m
    "r_k": Uniform(0.125, 0.250),
    "q_y_pct": Uniform(4.0, 6.0),
}


def build_shear_building(n_stories, story_mass, story_stiffness, base, xi,
                         corrosion=None, t_ref_mm=10.0):
    """Shear building on a hysteretic isolation layer, optionally corroded.

    Args:
        n_stories: story count (>= 1).
        story_mass, story_stiffness: per-story values (uniform stories).
        base: mapping with at least m_b (kg).
        xi: mapping with k_post, c_b, r_k, q_y_pct (as in build_4dof).
        corrosion: optional CorrosionModel; when given, the superstructure
            stiffness is scaled by the cubic thickness retention and the
            story masses by the linear area retention.  The isolator yield
            force stays referenced to the pristine total weight.
        t_ref_mm: reference section thickness for the corrosion scaling.

    Rayleigh damping ties 3% ratios at modes 1 and min(10, n_stories).
    """
    if n_stories < 1:
        raise ValueError("n_stories must be >= 1")
    k_post, c_b, r_k, q_y_pct = _require(xi, "k_post", "c_b", "r_k", "q_y_pct")
    if not 0.0 < r_k < 1.0:
        raise ValueError("r_k must lie in (0, 1)")
    m_b = float(base["m_b"])
    if m_b <= 0:
        raise ValueError("base mass must be positive")

    masses = np.full(n_stories, float(story_mass))
    stiffs = np.full(n_stories, float(story_stiffness))
    pristine_total = m_b + masses.sum()

    if corrosion is not None:
        d_um = corrosion_loss(corrosion)
        k_fac = stiffness_retention(d_um, t_ref_mm)
        a_fac = 1.0 - d_um / (t_ref_mm * 1000.0)
        stiffs = stiffs * k_fac
        masses = masses * a_fac

    M_s, K_s = _chain_matrices(masses, stiffs)
    anchor = (1, min(10, n_stories)) if n_stories > 1 else (1, 2)
    if n_stories == 1:
        # single-story chain has one mode; fall back to stiffness-only damping
        w1 = float(np.sqrt(K_s[0, 0] / M_s[0, 0]))
        ray = RayleighDamping(beta1=0.0, beta2=2 * 0.03 / w1,
                              mode_indices=(1, 1), damping_ratio=0.03)
    else:
        ray = rayleigh_coefficients(M_s, K_s, mode_indices=anchor,
                                    damping_ratio=0.03)
    C_s = ray.beta1 * M_s + ray.beta2 * K_s

    M, C, K = _isolated_assembly(M_s, C_s, K_s, m_b, c_b, k_post)

    q_yield = q_y_pct / 100.0 * pristine_total * GRAVITY
    k_pre = k_post / r_k
    params = PinchingParams.consistent(k_pre, q_yield, n_pow=1.0,
                                       **FOURDOF_DEGRADATION, **FOURDOF_PINCHING)
    n = n_stories + 1
    incidence = np.zeros(n)
    incidence[0] = 1.0
    element = HystereticElement(params=params, incidence=incidence,
                                scale=q_yield * (1.0 - r_k))
    exc_map = (-M @ np.ones(n)).reshape(n, 1)
    labels = ("u_b",) + tuple(f"s_{i}" for i in range(1, n_stories + 1))
    return MdofSystem(M=M, C=C, K=K, elements=(element,),
                      excitation_map=exc_map, labels=labels,
                      meta={"kind": "shear_building", "rayleigh": ray,
                            "k_pre": k_pre, "q_yield": q_yield,
                            "corroded": corrosion is not None})
