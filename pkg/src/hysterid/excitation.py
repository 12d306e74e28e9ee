"""Stochastic excitation generators and accelerogram ingestion.

Provides:

* Kanai-Tajimi filtered-white-noise ground acceleration, synthesized by
  spectral representation (sum of cosines with uniform random phases) on
  the harmonic grid of the record duration,
* road elevation profiles with the ISO 8608-style power-law amplitude
  spectrum, including a delayed rear-wheel track,
* a plain-text accelerogram loader,
* CSV export of any generated signal.

Conventions: the Kanai-Tajimi PSD is two-sided in circular frequency
(rad/s), so the total variance is the integral over the whole real line and
the one-sided PSD against ordinary frequency f (Hz) is 4*pi*S(2*pi*f).
All accelerations are in m/s^2.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.signal

from .mdof_models import GRAVITY

__all__ = [
    "KanaiTajimiSpec",
    "RoadSpec",
    "ExcitationSignal",
    "RoadProfile",
    "ParseError",
    "kanai_tajimi_s0",
    "kanai_tajimi_psd",
    "kanai_tajimi_realize",
    "road_amplitude",
    "road_profile",
    "road_signal",
    "road_to_forces",
    "load_accelerogram",
    "export_csv",
    "empirical_psd",
]


class ParseError(ValueError):
    """Malformed accelerogram file."""


@dataclass(frozen=True)
class ExcitationSignal:
    """Uniformly sampled excitation: time grid plus one or more channels."""

    t: np.ndarray
    channels: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        ch = np.asarray(self.channels, dtype=float)
        if ch.ndim == 1:
            ch = ch[:, None]
        if t.ndim != 1 or t.size < 2:
            raise ValueError("need a 1-D time grid with at least two samples")
        if ch.shape[0] != t.size:
            raise ValueError("channel length must match the time grid")
        steps = np.diff(t)
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
            raise ValueError("time grid must be uniform")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(ch))):
            raise ValueError("non-finite samples in excitation")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "channels", ch)

    @property
    def dt(self):
        return float(self.t[1] - self.t[0])

    @property
    def duration(self):
        return float(self.t[-1] - self.t[0])

    @property
    def n_channels(self):
        return self.channels.shape[1]


# ---------------------------------------------------------------------------
# Kanai-Tajimi ground acceleration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KanaiTajimiSpec:
    omega_g: float = 17.0      # rad/s, filter frequency
    zeta_g: float = 0.3        # filter damping
    sigma_w: float = 2.0       # intensity scale
    g: float = GRAVITY         # m/s^2
    duration: float = 20.0     # s
    dt: float = 0.005          # s

    def __post_init__(self):
        if not (self.omega_g > 0 and 0 < self.zeta_g < 1):
            raise ValueError("need omega_g > 0 and zeta_g in (0, 1)")
        if not (self.sigma_w > 0 and self.g > 0):
            raise ValueError("sigma_w and g must be positive")
        if not (self.duration > 0 and self.dt > 0 and self.duration > 2 * self.dt):
            raise ValueError("bad duration/dt combination")


def kanai_tajimi_s0(spec):
    """Spectral intensity S0 = sigma_w^2 * 0.03 * zeta_g * g^2 / (pi omega_g (4 zeta_g^2 + 1))."""
    z = spec.zeta_g
    return (spec.sigma_w**2 * 0.03 * z * spec.g**2
            / (np.pi * spec.omega_g * (4.0 * z * z + 1.0)))


def kanai_tajimi_psd(spec, omega):
    """Two-sided PSD of the filtered ground acceleration at circular frequency omega.

    S(w) = S0 (4 z^2 wg^2 w^2 + wg^4) / ((w^2 - wg^2)^2 + 4 z^2 wg^2 w^2);
    even in omega, peak near omega_g, decays as 1/w^2.
    """
    w2 = np.asarray(omega, dtype=float) ** 2
    wg2 = spec.omega_g**2
    num = 4.0 * spec.zeta_g**2 * wg2 * w2 + wg2 * wg2
    den = (w2 - wg2) ** 2 + 4.0 * spec.zeta_g**2 * wg2 * w2
    return kanai_tajimi_s0(spec) * num / den


def _harmonic_synthesis(amps, phases, n_samples):
    """Sum_k amps[k] cos(2 pi k j / N + phases[k]) for k = 1..len(amps), via irfft.

    The harmonics live on the FFT bins of an N-sample period, so the sum is
    evaluated exactly (to roundoff) in O(N log N).
    """
    n_bins = amps.size
    if n_bins > n_samples // 2:
        raise ValueError("more harmonics than the grid can carry")
    spectrum = np.zeros(n_samples // 2 + 1, dtype=complex)
    rotor = amps * np.exp(1j * phases)
    if n_bins == n_samples // 2 and n_samples % 2 == 0:
        spectrum[1:n_bins] = 0.5 * n_samples * rotor[:-1]
        # the Nyquist bin only carries its cosine part on the sample grid
        spectrum[n_bins] = n_samples * np.real(rotor[-1])
    else:
        spectrum[1:n_bins + 1] = 0.5 * n_samples * rotor
    return np.fft.irfft(spectrum, n_samples)


def kanai_tajimi_realize(spec, seed):
    """One seeded realization of the ground acceleration on [0, duration].

    Spectral representation: a(t) = sum_k sqrt(4 S(w_k) dw) cos(w_k t + phi_k)
    with dw = 2 pi / duration, bins up to the sampling Nyquist, and phases
    drawn i.i.d. from U[0, 2 pi) in a single call.  The series is periodic
    on the duration, so the final sample repeats the first.
    """
    n_steps = int(round(spec.duration / spec.dt))
    if abs(n_steps * spec.dt - spec.duration) > 1e-9 * spec.duration:
        raise ValueError("duration must be an integer number of dt steps")
    d_omega = 2.0 * np.pi / spec.duration
    n_bins = n_steps // 2
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2.0 * np.pi, n_bins)
    omegas = d_omega * np.arange(1, n_bins + 1)
    amps = np.sqrt(4.0 * kanai_tajimi_psd(spec, omegas) * d_omega)
    series = _harmonic_synthesis(amps, phases, n_steps)
    samples = np.concatenate([series, series[:1]])
    t = np.arange(n_steps + 1) * spec.dt
    meta = {"kind": "kanai_tajimi", "seed_entropy": _seed_entropy(seed),
            "omega_g": spec.omega_g, "zeta_g": spec.zeta_g,
            "sigma_w": spec.sigma_w, "g": spec.g,
            "channel_names": ["a_g"]}
    return ExcitationSignal(t=t, channels=samples, meta=meta)


def _seed_entropy(seed):
    if isinstance(seed, np.random.Generator):
        return None
    if isinstance(seed, np.random.SeedSequence):
        return seed.entropy
    return seed


# ---------------------------------------------------------------------------
# road profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RoadSpec:
    road_class_b: int = 1      # 1 (very good) .. 7 (extremely poor)
    omega0: float = 1.0        # cycles/m, reference spatial frequency
    omega_min: float = 0.01    # cycles/m
    omega_max: float = 100.0   # cycles/m
    a: float = 2.0             # spectral slope index
    velocity: float = 20.0     # m/s
    t_final: float = 10.0      # s
    wheelbase: float = 2.99    # m, front-to-rear delay distance
    dt: float = 0.001          # s, time grid for the wheel tracks

    def __post_init__(self):
        if not 1 <= self.road_class_b <= 7:
            raise ValueError("road_class_b must be in 1..7")
        if not 0 < self.omega_min < self.omega_max:
            raise ValueError("need 0 < omega_min < omega_max")
        if not (self.velocity > 0 and self.t_final > 0 and self.dt > 0):
            raise ValueError("velocity, t_final and dt must be positive")
        if self.wheelbase < 0:
            raise ValueError("wheelbase must be nonnegative")

    @property
    def distance(self):
        return self.velocity * self.t_final

    @property
    def delta_omega(self):
        return 1.0 / self.distance

    @property
    def t_delay(self):
        return self.wheelbase / self.velocity


def road_amplitude(road_class_b, omega0, omega_i, a, delta_omega):
    """Harmonic amplitude S_i = 2^b sqrt(2 (omega0/omega_i)^a d_omega) * 1e-3 m."""
    omega_i = np.asarray(omega_i, dtype=float)
    return (2.0 ** road_class_b
            * np.sqrt(2.0 * (omega0 / omega_i) ** a * delta_omega) * 1e-3)


@dataclass(frozen=True)
class RoadProfile:
    """Elevation along the track plus the two wheel time histories."""

    t: np.ndarray
    l: np.ndarray
    h_front: np.ndarray
    h_rear: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def elevation(self):
        """h(l) on the spatial grid l (the front wheel samples it in time)."""
        return self.h_front


def road_profile(spec, seed):
    """Synthesize one seeded road realization and its delayed rear track.

    h(l) = sum_i S_i sin(2 pi Omega_i l + phi_i) over the spatial-frequency
    bins Omega_i: the multiples of delta_omega = 1/distance inside
    [omega_min, min(omega_max, sampling Nyquist)].  Bins above the sampling
    Nyquist 1/(2 v dt) cannot be represented on the time grid; with the
    default a = 2 slope they carry a negligible fraction of the variance.
    The rear track is the front track delayed by round(t_delay/dt) samples
    with a zero lead-in.
    """
    n_steps = int(round(spec.t_final / spec.dt))
    if abs(n_steps * spec.dt - spec.t_final) > 1e-9 * spec.t_final:
        raise ValueError("t_final must be an integer number of dt steps")
    d_om = spec.delta_omega
    nyquist = 1.0 / (2.0 * spec.velocity * spec.dt)
    om_cut = min(spec.omega_max, nyquist)
    k_lo = int(np.ceil(spec.omega_min / d_om - 1e-9))
    k_hi = int(np.floor(om_cut / d_om + 1e-9))
    if k_lo < 1:
        k_lo = 1
    if k_hi < k_lo:
        raise ValueError("no spatial-frequency bins in the requested band")
    ks = np.arange(k_lo, k_hi + 1)
    omegas = ks * d_om
    amps = road_amplitude(spec.road_class_b, spec.omega0, omegas, spec.a, d_om)
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2.0 * np.pi, omegas.size)

    # sin(theta + phi) = cos(theta + phi - pi/2); the bins sit on the FFT
    # grid of the distance, which coincides with the time-grid harmonics
    full_amps = np.zeros(n_steps // 2)
    full_phases = np.zeros(n_steps // 2)
    full_amps[ks - 1] = amps
    full_phases[ks - 1] = phases - 0.5 * np.pi
    series = _harmonic_synthesis(full_amps, full_phases, n_steps)
    h_front = np.concatenate([series, series[:1]])

    n_delay = int(round(spec.t_delay / spec.dt))
    h_rear = np.zeros_like(h_front)
    if n_delay < h_front.size:
        h_rear[n_delay:] = h_front[:h_front.size - n_delay]

    t = np.arange(n_steps + 1) * spec.dt
    meta = {"kind": "road", "seed_entropy": _seed_entropy(seed),
            "road_class_b": spec.road_class_b, "velocity": spec.velocity,
            "t_delay": spec.t_delay, "n_delay": n_delay,
            "omega_band": (float(omegas[0]), float(omegas[-1]))}
    return RoadProfile(t=t, l=spec.velocity * t, h_front=h_front,
                       h_rear=h_rear, meta=meta)


def road_signal(profile):
    """Pack a road profile as a two-channel excitation (front, rear elevation)."""
    meta = dict(profile.meta)
    meta["channel_names"] = ["h_front", "h_rear"]
    return ExcitationSignal(t=profile.t,
                            channels=np.column_stack([profile.h_front,
                                                      profile.h_rear]),
                            meta=meta)


def road_to_forces(profile, k_wf, k_wr):
    """Wheel forces w = [k_wf h_front, k_wr h_rear] as an excitation signal."""
    if k_wf <= 0 or k_wr <= 0:
        raise ValueError("tyre stiffnesses must be positive")
    meta = dict(profile.meta)
    meta["kind"] = "road_forces"
    meta["channel_names"] = ["w_front", "w_rear"]
    return ExcitationSignal(t=profile.t,
                            channels=np.column_stack([k_wf * profile.h_front,
                                                      k_wr * profile.h_rear]),
                            meta=meta)


# ---------------------------------------------------------------------------
# accelerogram files
# ---------------------------------------------------------------------------

def load_accelerogram(path):
    """Read a plain-text accelerogram.

    Two layouts are accepted, with '#' comments and blank lines ignored:

    * a "DT=<seconds>" header line followed by acceleration values
      (any number per line), or
    * two columns per line: time and acceleration.  A non-uniform time
      column is resampled onto a uniform grid at the median step.

    Values are taken as m/s^2; the peak (and its g fraction) is reported in
    the signal metadata.
    """
    rows = []
    dt_header = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if dt_header is None and not rows and line.upper().startswith("DT"):
                try:
                    dt_header = float(line.split("=", 1)[1])
                except (IndexError, ValueError):
                    raise ParseError(f"line {lineno}: bad DT header") from None
                if dt_header <= 0:
                    raise ParseError(f"line {lineno}: DT must be positive")
                continue
            parts = line.replace(",", " ").split()
            try:
                values = [float(p) for p in parts]
            except ValueError:
                raise ParseError(f"line {lineno}: non-numeric value") from None
            if dt_header is None and len(values) != 2:
                raise ParseError(
                    f"line {lineno}: expected two columns (t, a)"
                    " or a DT header")
            rows.append(values)
    if not rows:
        raise ParseError("empty accelerogram file")

    if dt_header is not None:
        accel = np.concatenate([np.asarray(r) for r in rows])
        if accel.size < 2:
            raise ParseError("need at least two samples")
        t = np.arange(accel.size) * dt_header
    else:
        data = np.asarray(rows)
        t_raw, accel_raw = data[:, 0], data[:, 1]
        if t_raw.size < 2:
            raise ParseError("need at least two samples")
        if np.any(np.diff(t_raw) <= 0):
            raise ParseError("time column must be strictly increasing")
        steps = np.diff(t_raw)
        dt = float(np.median(steps))
        if np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
            t, accel = t_raw - t_raw[0], accel_raw
        else:
            n = int(np.floor((t_raw[-1] - t_raw[0]) / dt)) + 1
            t = np.arange(n) * dt
            accel = np.interp(t + t_raw[0], t_raw, accel_raw)

    if not np.all(np.isfinite(accel)):
        raise ParseError("non-finite acceleration value")
    peak = float(np.max(np.abs(accel)))
    meta = {"kind": "accelerogram", "path": str(path),
            "peak": peak, "peak_g": peak / GRAVITY,
            "channel_names": ["a_g"]}
    return ExcitationSignal(t=t, channels=accel, meta=meta)


# ---------------------------------------------------------------------------
# export and spectra
# ---------------------------------------------------------------------------

def export_csv(signal, path):
    """Write a signal as CSV: t plus one column per channel, full precision."""
    names = signal.meta.get("channel_names")
    if not names or len(names) != signal.n_channels:
        names = [f"ch{i + 1}" for i in range(signal.n_channels)]
    header = ",".join(["t"] + list(names))
    data = np.column_stack([signal.t, signal.channels])
    np.savetxt(path, data, delimiter=",", header=header, comments="",
               fmt="%.17g")


def empirical_psd(values, dt, nperseg=None):
    """One-sided Welch PSD (density vs Hz) of a sampled series."""
    values = np.asarray(values, dtype=float)
    if nperseg is None:
        nperseg = min(values.size, 2048)
    freq, pxx = scipy.signal.welch(values, fs=1.0 / dt, window="hann",
                                   nperseg=nperseg, detrend="constant")
    return freq, pxx
