"""State-space assembly, fixed-step integration and paired dataset generation.

A hysteretic MDOF system integrates as X = [u, v, z, e]: n displacements,
n velocities and one (z, e) pair per hysteretic element.  Ensembles of
systems that share layout (DOF count, element count, law, time grid) are
marched in lock-step so Monte Carlo sweeps stay vectorized.
"""

import dataclasses
import hashlib
import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from .excitation import (
    ExcitationSignal,
    KanaiTajimiSpec,
    RoadSpec,
    kanai_tajimi_realize,
    road_profile,
    road_signal,
)
from .hysteresis import DegenerateStateError, hysteretic_rate
from .mdof_models import (
    BUILDING_UNCERTAIN,
    CAR_UNCERTAIN,
    FOURDOF_UNCERTAIN,
    CorrosionModel,
    build_4dof,
    build_half_car,
    build_quarter_car,
    build_shear_building,
    sample_uncertain,
)

logger = logging.getLogger(__name__)

MAX_REDRAWS = 3
DEFAULT_BLOWUP = 1.0e6
N_D_DEFAULT = 200


class DivergenceError(RuntimeError):
    """Integration produced a non-finite or runaway state."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


# ---------------------------------------------------------------------------
# specs
# ---------------------------------------------------------------------------

QOI_KINDS = ("hysteretic", "displacement", "acceleration")


@dataclass(frozen=True)
class QoISpec:
    """Scalar output selector: an auxiliary z, a displacement or an
    acceleration, by index."""

    kind: str
    index: int = 0

    def __post_init__(self):
        if self.kind not in QOI_KINDS:
            raise ValueError(f"qoi kind must be one of {QOI_KINDS}")
        if self.index < 0:
            raise ValueError("qoi index must be non-negative")


@dataclass(frozen=True)
class IntegratorSpec:
    """Fixed-step integrator choice.

    dt = None marches on the excitation grid; an explicit dt must divide the
    record duration (the excitation is linearly interpolated in between).
    """

    method: str = "rk4"
    dt: float = None
    blow_up: float = DEFAULT_BLOWUP

    def __post_init__(self):
        if self.method not in ("rk4", "midpoint"):
            raise ValueError("method must be 'rk4' or 'midpoint'")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.blow_up <= 0:
            raise ValueError("blow_up must be positive")


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StateSpaceSystem:
    """A batch of same-layout MDOF systems in first-order form.

    forcing holds M^-1 w at the excitation grid nodes, shape (B, N, n).
    minv_l collects the hysteretic force columns scale_j M^-1 incidence_j so
    the acceleration is forcing - minv_c v - minv_k u - minv_l z.
    """

    t: np.ndarray
    forcing: np.ndarray
    minv_c: np.ndarray
    minv_k: np.ndarray
    minv_l: np.ndarray
    incidence: np.ndarray
    law: str
    params: SimpleNamespace
    qoi: QoISpec

    @property
    def batch(self):
        return self.forcing.shape[0]

    @property
    def n_dof(self):
        return self.forcing.shape[2]

    @property
    def n_elements(self):
        return self.incidence.shape[1]

    @property
    def state_dim(self):
        return 2 * self.n_dof + 2 * self.n_elements


def _stack_params(systems):
    """Stack element parameter fields across the batch into (B, g) arrays."""
    first = systems[0].elements[0].params
    ptype = type(first)
    names = [f.name for f in dataclasses.fields(ptype)]
    for sys in systems:
        for el in sys.elements:
            if type(el.params) is not ptype:
                raise ValueError("all elements in a batch must share the "
                                 "same parameter type")
    out = {}
    for name in names:
        out[name] = np.array([[getattr(el.params, name) for el in sys.elements]
                              for sys in systems], dtype=float)
    return SimpleNamespace(**out)


def assemble_ensemble(systems, law, excitations, qoi):
    """Assemble a batch of systems driven by per-member excitations.

    Every system must share the DOF/element counts and parameter type, and
    every excitation the same time grid.  Systems expecting fewer excitation
    channels than a signal provides use its leading channels.
    """
    systems = list(systems)
    excitations = list(excitations)
    if not systems:
        raise ValueError("empty system batch")
    if len(excitations) != len(systems):
        raise ValueError("need one excitation per system")
    n = systems[0].n_dof
    g = systems[0].n_elements
    if g == 0:
        raise ValueError("systems must carry at least one hysteretic element")
    for sys in systems:
        if sys.n_dof != n or sys.n_elements != g:
            raise ValueError("systems in a batch must share the layout")

    t = excitations[0].t
    for sig in excitations[1:]:
        if sig.t.shape != t.shape or not np.array_equal(sig.t, t):
            raise ValueError("excitations in a batch must share the time grid")

    if qoi.kind == "hysteretic":
        if qoi.index >= g:
            raise ValueError("hysteretic qoi index out of range")
    elif qoi.index >= n:
        raise ValueError("qoi DOF index out of range")

    b = len(systems)
    minv_c = np.empty((b, n, n))
    minv_k = np.empty((b, n, n))
    minv_l = np.empty((b, n, g))
    incidence = np.empty((b, g, n))
    forcing = np.empty((b, t.size, n))
    for i, (sys, sig) in enumerate(zip(systems, excitations)):
        n_w = sys.excitation_map.shape[1]
        if sig.n_channels < n_w:
            raise ValueError(f"system expects {n_w} excitation channels, "
                             f"signal has {sig.n_channels}")
        minv = np.linalg.inv(sys.M)
        minv_c[i] = minv @ sys.C
        minv_k[i] = minv @ sys.K
        minv_l[i] = minv @ sys.hysteretic_influence()
        incidence[i] = np.stack([el.incidence for el in sys.elements])
        forcing[i] = sig.channels[:, :n_w] @ (minv @ sys.excitation_map).T

    return StateSpaceSystem(t=t, forcing=forcing, minv_c=minv_c,
                            minv_k=minv_k, minv_l=minv_l,
                            incidence=incidence, law=law,
                            params=_stack_params(systems), qoi=qoi)


def assemble(system, law, excitation, qoi):
    """Single-system convenience wrapper around assemble_ensemble."""
    return assemble_ensemble([system], law, [excitation], qoi)


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimResult:
    """Trajectories of a (batched) integration, all on the output grid."""

    t: np.ndarray
    u: np.ndarray
    v: np.ndarray
    z: np.ndarray
    e: np.ndarray
    acc: np.ndarray
    qoi: np.ndarray


def _rhs(ss, x, w):
    n = ss.n_dof
    g = ss.n_elements
    u = x[:, :n]
    v = x[:, n:2 * n]
    z = x[:, 2 * n:2 * n + g]
    e = x[:, 2 * n + g:]
    acc = (w
           - np.matmul(ss.minv_c, v[:, :, None])[:, :, 0]
           - np.matmul(ss.minv_k, u[:, :, None])[:, :, 0]
           - np.matmul(ss.minv_l, z[:, :, None])[:, :, 0])
    v_rel = np.matmul(ss.incidence, v[:, :, None])[:, :, 0]
    dz = hysteretic_rate(ss.law, ss.params, z, e, v_rel)
    return np.concatenate([v, acc, dz, z * v_rel], axis=1)


def _stage_forcing(ss, dt):
    """Forcing at step nodes and half-steps, shapes (B, S+1, n), (B, S, n)."""
    t = ss.t
    grid_dt = t[1] - t[0]
    duration = t[-1] - t[0]
    if dt is None or abs(dt - grid_dt) <= 1e-9 * grid_dt:
        mids = 0.5 * (ss.forcing[:, :-1] + ss.forcing[:, 1:])
        return ss.forcing, mids, grid_dt
    steps = int(round(duration / dt))
    if steps < 1 or abs(steps * dt - duration) > 1e-9 * duration:
        raise ValueError("dt must divide the excitation duration")
    pos = np.arange(2 * steps + 1) * (0.5 * dt / grid_dt)
    idx = np.minimum(pos.astype(int), t.size - 2)
    frac = pos - idx
    vals = ((1.0 - frac[None, :, None]) * ss.forcing[:, idx]
            + frac[None, :, None] * ss.forcing[:, idx + 1])
    return vals[:, ::2], vals[:, 1::2], dt


def _max_frequency(ss):
    lams = np.linalg.eigvals(ss.minv_k)
    return float(np.sqrt(np.abs(lams.real).max()))


def integrate(ss, spec=IntegratorSpec(), x0=None):
    """Fixed-step march over the excitation duration.

    Returns a SimResult; raises DivergenceError (with the offending step
    index) if the state leaves the finite, bounded regime.
    """
    nodes, mids, dt = _stage_forcing(ss, spec.dt)
    steps = nodes.shape[1] - 1
    b, n, g = ss.batch, ss.n_dof, ss.n_elements
    dim = ss.state_dim

    w_max = _max_frequency(ss)
    if dt * w_max >= 0.5:
        warnings.warn(f"dt * omega_max = {dt * w_max:.2f} >= 0.5; the "
                      "fixed step may be too coarse for this system",
                      stacklevel=2)

    x = np.zeros((b, dim))
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float)
        if x0.shape == (dim,):
            x = np.broadcast_to(x0, (b, dim)).copy()
        elif x0.shape == (b, dim):
            x = x0.copy()
        else:
            raise ValueError(f"x0 must have shape ({dim},) or ({b}, {dim})")

    hist = np.empty((b, steps + 1, dim))
    hist[:, 0] = x
    for k in range(steps):
        f0 = nodes[:, k]
        fm = mids[:, k]
        f1 = nodes[:, k + 1]
        try:
            if spec.method == "rk4":
                k1 = _rhs(ss, x, f0)
                k2 = _rhs(ss, x + 0.5 * dt * k1, fm)
                k3 = _rhs(ss, x + 0.5 * dt * k2, fm)
                k4 = _rhs(ss, x + dt * k3, f1)
                x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            else:
                k1 = _rhs(ss, x, f0)
                x = x + dt * _rhs(ss, x + 0.5 * dt * k1, fm)
        except (DegenerateStateError, ValueError, FloatingPointError) as err:
            raise DivergenceError(
                f"state rate failed at step {k + 1} "
                f"(t = {(k + 1) * dt:.4f} s): {err}", step=k + 1) from err
        if not np.isfinite(x).all() or np.abs(x).max() > spec.blow_up:
            raise DivergenceError(
                f"state diverged at step {k + 1} "
                f"(t = {(k + 1) * dt:.4f} s)", step=k + 1)
        hist[:, k + 1] = x

    t_out = ss.t[0] + np.arange(steps + 1) * dt
    u = hist[:, :, :n]
    v = hist[:, :, n:2 * n]
    z = hist[:, :, 2 * n:2 * n + g]
    e = hist[:, :, 2 * n + g:]
    acc = (nodes
           - np.einsum("bij,btj->bti", ss.minv_c, v)
           - np.einsum("bij,btj->bti", ss.minv_k, u)
           - np.einsum("bij,btj->bti", ss.minv_l, z))
    if ss.qoi.kind == "hysteretic":
        out = z[:, :, ss.qoi.index]
    elif ss.qoi.kind == "displacement":
        out = u[:, :, ss.qoi.index]
    else:
        out = acc[:, :, ss.qoi.index]
    return SimResult(t=t_out, u=u, v=v, z=z, e=e, acc=acc, qoi=out)


# ---------------------------------------------------------------------------
# example registry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FourDofExample:
    """Base-isolated three-story frame under filtered-white-noise ground
    motion; the high-fidelity isolator degrades (case I) or degrades and
    pinches (case II)."""

    case: str = "I"
    zeta_s: float = 0.5
    duration: float = 20.0
    dt: float = 0.005

    xi_spec = FOURDOF_UNCERTAIN
    cost_ratio = 1.0
    equalize_cost = False
    fixed_excitation = False
    default_qoi = "z"

    def __post_init__(self):
        if self.case not in ("I", "II"):
            raise ValueError("case must be 'I' or 'II'")

    @property
    def name(self):
        return f"4dof_case{self.case}"

    @property
    def xi_names(self):
        return tuple(self.xi_spec)

    @property
    def qoi_specs(self):
        return {"z": QoISpec("hysteretic", 0),
                "u_b": QoISpec("displacement", 0),
                "u_3": QoISpec("displacement", 3)}

    def config(self):
        cfg = {"duration": self.duration, "dt": self.dt}
        if self.case == "II":
            cfg["zeta_s"] = self.zeta_s
        return cfg

    def draw_xi(self, seed, count):
        return sample_uncertain(self.xi_spec, seed, count)

    def build_lf(self, xi):
        return build_4dof(xi), "bouc_wen"

    def build_hf(self, xi):
        if self.case == "I":
            return build_4dof(xi), "baber_wen"
        return build_4dof(xi, zeta_s=self.zeta_s), "pinching"

    def make_excitation(self, seed):
        spec = KanaiTajimiSpec(duration=self.duration, dt=self.dt)
        return kanai_tajimi_realize(spec, seed)


@dataclass(frozen=True)
class CarExample:
    """Vehicle on a rough road: degrading half-car truth against a pristine
    quarter-car surrogate, body acceleration as the output."""

    duration: float = 10.0
    dt: float = 0.001
    velocity: float = 20.0

    xi_spec = CAR_UNCERTAIN
    name = "car"
    cost_ratio = 1.84
    equalize_cost = True
    fixed_excitation = False
    default_qoi = "acc_body"

    @property
    def xi_names(self):
        return tuple(self.xi_spec)

    @property
    def qoi_specs(self):
        return {"acc_body": QoISpec("acceleration", 0)}

    def config(self):
        return {"duration": self.duration, "dt": self.dt,
                "velocity": self.velocity}

    def draw_xi(self, seed, count):
        return sample_uncertain(self.xi_spec, seed, count)

    def build_lf(self, xi):
        return build_quarter_car(xi), "bouc_wen"

    def build_hf(self, xi):
        return build_half_car(xi), "baber_wen"

    def make_excitation(self, seed):
        spec = RoadSpec(velocity=self.velocity, t_final=self.duration,
                        dt=self.dt)
        return road_signal(road_profile(spec, seed))


@dataclass(frozen=True)
class BuildingExample:
    """Isolated shear building: the truth is corroded and degrading, the
    surrogate pristine.  A single seeded ground-motion record is shared by
    every realization, so only the parameters vary."""

    n_stories: int = 11
    story_mass: float = 40.0e3
    story_stiffness: float = 8.48e7
    m_b: float = 60.0e3
    record_seed: int = 1940
    duration: float = 20.0
    dt: float = 0.005
    corrosion: CorrosionModel = CorrosionModel()
    t_ref_mm: float = 10.0

    xi_spec = BUILDING_UNCERTAIN
    name = "building"
    cost_ratio = 1.0
    equalize_cost = True
    fixed_excitation = True
    default_qoi = "u_roof"

    @property
    def xi_names(self):
        return tuple(self.xi_spec)

    @property
    def qoi_specs(self):
        return {"u_roof": QoISpec("displacement", self.n_stories)}

    def config(self):
        return {"n_stories": self.n_stories, "story_mass": self.story_mass,
                "story_stiffness": self.story_stiffness, "m_b": self.m_b,
                "record_seed": self.record_seed, "duration": self.duration,
                "dt": self.dt, "t_ref_mm": self.t_ref_mm,
                "corrosion": {"B1": self.corrosion.B1,
                              "B2": self.corrosion.B2,
                              "t_years": self.corrosion.t_years}}

    def draw_xi(self, seed, count):
        return sample_uncertain(self.xi_spec, seed, count)

    def build_lf(self, xi):
        sys = build_shear_building(self.n_stories, self.story_mass,
                                   self.story_stiffness, {"m_b": self.m_b},
                                   xi, corrosion=None, t_ref_mm=self.t_ref_mm)
        return sys, "bouc_wen"

    def build_hf(self, xi):
        sys = build_shear_building(self.n_stories, self.story_mass,
                                   self.story_stiffness, {"m_b": self.m_b},
                                   xi, corrosion=self.corrosion,
                                   t_ref_mm=self.t_ref_mm)
        return sys, "baber_wen"

    def make_excitation(self, seed):
        spec = KanaiTajimiSpec(duration=self.duration, dt=self.dt)
        return kanai_tajimi_realize(spec, seed)


EXAMPLE_NAMES = ("4dof_caseI", "4dof_caseII", "car", "building")


def get_example(name, **overrides):
    """Instantiate a registered example, optionally overriding its knobs."""
    if name == "4dof_caseI":
        return FourDofExample(case="I", **overrides)
    if name == "4dof_caseII":
        return FourDofExample(case="II", **overrides)
    if name == "car":
        return CarExample(**overrides)
    if name == "building":
        if isinstance(overrides.get("corrosion"), dict):
            overrides["corrosion"] = CorrosionModel(**overrides["corrosion"])
        return BuildingExample(**overrides)
    raise ValueError(f"unknown example '{name}'; choose from {EXAMPLE_NAMES}")


def standard_train_size(n_train, cost_ratio, equalize):
    """Training-set size for the single-fidelity protocol at equal budget.

    The paired protocol spends n_train high- plus n_train low-fidelity
    simulations; with a high/low cost ratio r the same budget buys
    n_train (1 + r) / r high-fidelity runs.
    """
    if not equalize:
        return int(n_train)
    return int(round(n_train * (1.0 + cost_ratio) / cost_ratio))


# ---------------------------------------------------------------------------
# dataset generation
# ---------------------------------------------------------------------------

@dataclass
class Dataset:
    """Paired QoI trajectories on the storage grid plus their manifest.

    Rows 0..max(n_train, n_train_standard)-1 are training realizations (the
    paired protocol uses the first n_train of them), the last n_val rows are
    the shared validation set.
    """

    example: object
    qoi_name: str
    t: np.ndarray
    xi: np.ndarray
    y_lf: np.ndarray
    y_hf: np.ndarray
    y_corr: np.ndarray
    n_train: int
    n_train_standard: int
    n_val: int
    noise_pct: float
    manifest: dict

    @property
    def n_total(self):
        return self.y_lf.shape[0]

    @property
    def val_indices(self):
        return np.arange(self.n_total - self.n_val, self.n_total)

    def train_indices(self, protocol):
        if protocol == "bifidelity":
            return np.arange(self.n_train)
        if protocol == "standard":
            return np.arange(self.n_train_standard)
        raise ValueError("protocol must be 'bifidelity' or 'standard'")

    def excitation_for(self, k):
        """Regenerate the excitation of realization k from its seed."""
        return self.example.make_excitation(
            self.manifest["excitation_seeds"][int(k)])


def _xi_row(xi, names, k):
    return {name: float(xi[k, i]) for i, name in enumerate(names)}


def _simulate_rows(example, xi, names, seeds, qspec, ispec):
    """Simulate the LF/HF pair for the given rows; returns (B, N) arrays."""
    sigs = [example.make_excitation(s) for s in seeds]
    rows = range(len(seeds))
    built = [example.build_lf(_xi_row(xi, names, k)) for k in rows]
    lf = integrate(assemble_ensemble([b[0] for b in built], built[0][1],
                                     sigs, qspec), ispec)
    built = [example.build_hf(_xi_row(xi, names, k)) for k in rows]
    hf = integrate(assemble_ensemble([b[0] for b in built], built[0][1],
                                     sigs, qspec), ispec)
    return lf.qoi, hf.qoi, lf.t


def _store_rows(t_sim, series, t_store):
    return np.stack([np.interp(t_store, t_sim, row) for row in series])


def generate_dataset(example, n_train, n_val, seed, noise_pct=0.0,
                     qoi=None, n_d=N_D_DEFAULT, out_dir=None, chunk=128,
                     integrator=IntegratorSpec()):
    """Simulate paired low-/high-fidelity realizations of an example.

    Draws max(n_train, equalized standard size) training realizations plus
    n_val validation realizations.  Additive Gaussian noise (sd = noise_pct
    times each trajectory's own sd) perturbs training y_hf only; y_corr is
    recomputed afterwards so the stored discrepancy identity stays exact.
    Realizations whose integration diverges are redrawn up to 3 times.
    """
    if n_train < 1 or n_val < 1:
        raise ValueError("n_train and n_val must be >= 1")
    if not 0.0 <= noise_pct < 1.0:
        raise ValueError("noise_pct must lie in [0, 1)")
    qoi_name = qoi or example.default_qoi
    try:
        qspec = example.qoi_specs[qoi_name]
    except KeyError:
        raise ValueError(f"example '{example.name}' has no qoi '{qoi_name}'; "
                         f"choose from {tuple(example.qoi_specs)}") from None

    n_std = standard_train_size(n_train, example.cost_ratio,
                                example.equalize_cost)
    n_block = max(n_train, n_std)
    n_total = n_block + n_val
    names = example.xi_names

    root = np.random.SeedSequence(seed)
    ss_draw, ss_exc, ss_noise, ss_retry = root.spawn(4)
    xi_dict = example.draw_xi(ss_draw, n_total)
    xi = np.column_stack([xi_dict[name] for name in names])
    if example.fixed_excitation:
        exc_seeds = [int(example.record_seed)] * n_total
    else:
        rng_exc = np.random.default_rng(ss_exc)
        exc_seeds = [int(s) for s in
                     rng_exc.integers(0, 2 ** 63 - 1, size=n_total)]

    t_store = np.linspace(0.0, example.duration, n_d)
    y_lf = np.empty((n_total, n_d))
    y_hf = np.empty((n_total, n_d))
    rng_retry = np.random.default_rng(ss_retry)
    retries = []

    for start in range(0, n_total, chunk):
        rows = list(range(start, min(start + chunk, n_total)))
        try:
            lf_q, hf_q, t_sim = _simulate_rows(
                example, xi, names, [exc_seeds[k] for k in rows], qspec,
                integrator)
            y_lf[rows] = _store_rows(t_sim, lf_q, t_store)
            y_hf[rows] = _store_rows(t_sim, hf_q, t_store)
        except DivergenceError:
            # isolate and redraw the offending realizations one at a time
            for k in rows:
                for attempt in range(MAX_REDRAWS + 1):
                    try:
                        lf_q, hf_q, t_sim = _simulate_rows(
                            example, xi, names, [exc_seeds[k]], qspec,
                            integrator)
                        break
                    except DivergenceError as err:
                        if attempt == MAX_REDRAWS:
                            raise DivergenceError(
                                f"realization {k} diverged after "
                                f"{MAX_REDRAWS} redraws: {err}",
                                step=err.step) from err
                        logger.warning("realization %d diverged (%s); "
                                       "redrawing", k, err)
                        new = example.draw_xi(
                            int(rng_retry.integers(0, 2 ** 63 - 1)), 1)
                        xi[k] = [new[name][0] for name in names]
                        if not example.fixed_excitation:
                            exc_seeds[k] = int(
                                rng_retry.integers(0, 2 ** 63 - 1))
                if attempt:
                    retries.append({"index": k, "redraws": attempt})
                y_lf[k] = _store_rows(t_sim, lf_q, t_store)[0]
                y_hf[k] = _store_rows(t_sim, hf_q, t_store)[0]

    if noise_pct > 0.0:
        rng_noise = np.random.default_rng(ss_noise)
        for k in range(n_block):
            sd = y_hf[k].std()
            y_hf[k] = y_hf[k] + noise_pct * sd * rng_noise.standard_normal(n_d)
    y_corr = y_hf - y_lf

    manifest = {
        "format": "hysterid-dataset-v1",
        "example": example.name,
        "example_config": example.config(),
        "qoi": qoi_name,
        "seed": int(seed),
        "sizes": {"n_train": int(n_train), "n_train_standard": int(n_std),
                  "n_val": int(n_val), "n_total": int(n_total)},
        "cost_ratio": example.cost_ratio,
        "cost_equalized": example.equalize_cost,
        "dt": example.dt,
        "duration": example.duration,
        "n_d": int(n_d),
        "integrator": integrator.method,
        "noise_pct": noise_pct,
        "xi_names": list(names),
        "fixed_excitation": example.fixed_excitation,
        "excitation_seeds": exc_seeds,
        "retries": retries,
    }
    rows_text = [_row_csv(t_store, y_lf[k], y_hf[k], y_corr[k], xi[k])
                 for k in range(n_total)]
    manifest["hash"] = _dataset_hash(manifest, rows_text)

    ds = Dataset(example=example, qoi_name=qoi_name, t=t_store, xi=xi,
                 y_lf=y_lf, y_hf=y_hf, y_corr=y_corr, n_train=int(n_train),
                 n_train_standard=int(n_std), n_val=int(n_val),
                 noise_pct=noise_pct, manifest=manifest)
    if out_dir is not None:
        write_dataset(ds, out_dir, rows_text)
    return ds


def _row_csv(t, y_lf, y_hf, y_corr, xi):
    header = "t,y_lf,y_hf,y_corr," + ",".join(
        f"xi_{i + 1}" for i in range(len(xi)))
    xi_text = "," + ",".join(f"{v:.17g}" for v in xi)
    lines = [header]
    for j in range(t.size):
        lines.append(f"{t[j]:.17g},{y_lf[j]:.17g},{y_hf[j]:.17g},"
                     f"{y_corr[j]:.17g}" + xi_text)
    return "\n".join(lines) + "\n"


def _manifest_core(manifest):
    core = {k: v for k, v in manifest.items() if k not in ("hash", "files")}
    return json.dumps(core, sort_keys=True, separators=(",", ":"))


def _dataset_hash(manifest, rows_text):
    h = hashlib.sha256()
    h.update(_manifest_core(manifest).encode())
    for text in rows_text:
        h.update(text.encode())
    return h.hexdigest()


def write_dataset(dataset, out_dir, rows_text=None):
    """Write manifest.json plus one real_<k>.csv per realization."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if rows_text is None:
        rows_text = [_row_csv(dataset.t, dataset.y_lf[k], dataset.y_hf[k],
                              dataset.y_corr[k], dataset.xi[k])
                     for k in range(dataset.n_total)]
    files = []
    for k, text in enumerate(rows_text):
        name = f"real_{k}.csv"
        (out / name).write_text(text)
        files.append(name)
    manifest = dict(dataset.manifest)
    manifest["files"] = files
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out


def load_dataset(path):
    """Load a dataset directory written by write_dataset."""
    path = Path(path)
    manifest = json.loads((path / "manifest.json").read_text())
    example = get_example(manifest["example"], **manifest["example_config"])
    sizes = manifest["sizes"]
    n_total = sizes["n_total"]
    q = len(manifest["xi_names"])
    n_d = manifest["n_d"]
    xi = np.empty((n_total, q))
    y_lf = np.empty((n_total, n_d))
    y_hf = np.empty((n_total, n_d))
    y_corr = np.empty((n_total, n_d))
    t = None
    for k in range(n_total):
        data = np.loadtxt(path / f"real_{k}.csv", delimiter=",", skiprows=1,
                          ndmin=2)
        if t is None:
            t = data[:, 0]
        y_lf[k] = data[:, 1]
        y_hf[k] = data[:, 2]
        y_corr[k] = data[:, 3]
        xi[k] = data[0, 4:]
    return Dataset(example=example, qoi_name=manifest["qoi"], t=t, xi=xi,
                   y_lf=y_lf, y_hf=y_hf, y_corr=y_corr,
                   n_train=sizes["n_train"],
                   n_train_standard=sizes["n_train_standard"],
                   n_val=sizes["n_val"], noise_pct=manifest["noise_pct"],
                   manifest=manifest)
