"""Synthetic CIR generation from a discrete multipath model.

Each propagation path contributes a band-limited pulse at its delay.  Paths
bound to a target carry a motion model that modulates delay and amplitude
over slow time; clutter paths are static.  Signals are represented at
complex baseband: the carrier enters only through the phase rotation
exp(-j*2*pi*center_freq*delay) applied to each path, which is what turns
millimetre-scale delay micro-motion into the phase signature detectors rely
on.  Fractional delays are applied as a linear phase in the frequency
domain, which is exact for band-limited pulses but circular in the fast-time
window.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .core import ActivityLabel, CirMatrix, SampleRecord
from .errors import ConfigError

__all__ = [
    "RadarConfig",
    "PathComponent",
    "MotionModel",
    "Scene",
    "raised_cosine_response",
    "raised_cosine_pulse",
    "motion_path",
    "motion_trajectory",
    "simulate_received",
    "synth_dataset",
    "parse_scene",
    "load_scene",
]


@dataclass(frozen=True)
class RadarConfig:
    """Pulse and timing parameters of the radar.

    Defaults follow the acquisition setup this package targets: a raised
    cosine pulse at 6.5 GHz with 500 MHz bandwidth and roll-off 0.5, a 0.1 s
    repetition interval, and 10 s samples (100 columns).  The fast-time
    sample count and interval are configuration choices, not measured values.
    """

    center_freq: float = 6.5e9
    bandwidth: float = 500e6
    rolloff: float = 0.5
    dt_fast: float = 0.5e-9
    dt_slow: float = 0.1
    n_fast: int = 64
    m_slow: int = 100

    def __post_init__(self):
        if not 0.0 <= self.rolloff <= 1.0:
            raise ConfigError(f"rolloff must be in [0, 1], got {self.rolloff}")
        if min(self.center_freq, self.bandwidth, self.dt_fast, self.dt_slow) <= 0:
            raise ConfigError("frequencies and sampling intervals must be positive")
        if self.n_fast < 1 or self.m_slow < 2:
            raise ConfigError("need n_fast >= 1 and m_slow >= 2")
        # occupied band must sit below the fast-time Nyquist frequency
        if (1.0 + self.rolloff) * self.bandwidth / 2.0 >= 0.5 / self.dt_fast:
            raise ConfigError(
                "pulse band edge (1+rolloff)*bandwidth/2 = "
                f"{(1 + self.rolloff) * self.bandwidth / 2:.3e} Hz exceeds the "
                f"Nyquist frequency {0.5 / self.dt_fast:.3e} Hz"
            )

    @property
    def fast_time_window(self) -> float:
        """Span of the fast-time axis in seconds; delays must fall inside it."""
        return self.n_fast * self.dt_fast


def raised_cosine_response(freq_offsets, bandwidth: float, rolloff: float) -> np.ndarray:
    """Raised-cosine magnitude response at the given offsets from band center.

    Unit in the flat passband |f| <= (1-rolloff)*B/2, cosine taper out to
    (1+rolloff)*B/2, zero beyond.
    """
    f = np.abs(np.asarray(freq_offsets, dtype=np.float64))
    flat_edge = (1.0 - rolloff) * bandwidth / 2.0
    stop_edge = (1.0 + rolloff) * bandwidth / 2.0
    h = np.zeros_like(f)
    h[f <= flat_edge] = 1.0
    if rolloff > 0:
        taper = (f > flat_edge) & (f < stop_edge)
        h[taper] = 0.5 * (1.0 + np.cos(np.pi / (rolloff * bandwidth) * (f[taper] - flat_edge)))
    return h


def _pulse_spectrum(cfg: RadarConfig) -> tuple[np.ndarray, np.ndarray]:
    freqs = np.fft.fftfreq(cfg.n_fast, d=cfg.dt_fast)
    return freqs, raised_cosine_response(freqs, cfg.bandwidth, cfg.rolloff)


def raised_cosine_pulse(cfg: RadarConfig) -> np.ndarray:
    """Baseband pulse samples s(n*dt_fast), length n_fast, peak at index 0.

    The discrete frequency response is the unit-peak raised cosine centered
    at baseband; the time-domain pulse is its inverse DFT and wraps
    circularly around the fast-time window.
    """
    _, spectrum = _pulse_spectrum(cfg)
    return np.fft.ifft(spectrum)


@dataclass(frozen=True)
class PathComponent:
    """A discrete propagation path: complex amplitude at a fixed base delay."""

    amplitude: complex
    delay: float
    is_target: bool = False

    def __post_init__(self):
        if not np.isfinite(self.amplitude):
            raise ConfigError("path amplitude must be finite")
        if not (np.isfinite(self.delay) and self.delay >= 0):
            raise ConfigError("path delay must be finite and non-negative")


# Surrogate motion magnitudes.  33 ps of two-way delay is about 5 mm of
# chest motion; talking and moving scale it by 2x and 10x.  Carrier phase
# decorrelates once excursions pass a carrier cycle, so the moving class
# additionally swings the reflection amplitude hard to keep residual
# energies in the order breathing < talking < moving.  None of these are
# measured values.
_DEFAULT_MOTION = {
    ActivityLabel.BREATHING: dict(rate=0.25, delay_excursion=33e-12, amp_excursion=0.10, jitter=0.0),
    ActivityLabel.TALKING: dict(rate=1.5, delay_excursion=66e-12, amp_excursion=0.25, jitter=0.3),
    ActivityLabel.MOVING: dict(rate=0.5, delay_excursion=330e-12, amp_excursion=2.0, jitter=1.0),
}


@dataclass(frozen=True)
class MotionModel:
    """Slow-time modulation of a target path's delay and amplitude.

    kind selects the trajectory family; rate is the fundamental rate in Hz,
    delay_excursion the peak delay deviation in seconds, amp_excursion the
    peak relative amplitude deviation, jitter a unitless randomness scale,
    and phase the starting phase in radians.
    """

    kind: ActivityLabel
    rate: float = 0.25
    delay_excursion: float = 33e-12
    amp_excursion: float = 0.10
    jitter: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        if self.kind is ActivityLabel.EMPTY:
            raise ConfigError("an empty car has no target motion")
        if self.rate <= 0:
            raise ConfigError("motion rate must be positive")
        if self.delay_excursion < 0 or self.amp_excursion < 0 or self.jitter < 0:
            raise ConfigError("excursions and jitter must be non-negative")

    @classmethod
    def default_for(cls, kind: ActivityLabel, **overrides) -> "MotionModel":
        params = dict(_DEFAULT_MOTION[kind])
        params.update(overrides)
        return cls(kind=kind, **params)


def motion_path(model: MotionModel, n_reps: int, dt_slow: float, rng=None) -> tuple[np.ndarray, np.ndarray]:
    """Delay offsets and complex amplitude factors for repetitions 0..n_reps-1.

    Breathing is a smooth sinusoid at the fundamental rate (plus optional
    phase jitter).  Talking is a sinusoid whose rate and phase wander
    randomly.  Moving is a bounded random walk with the largest excursions.
    Deterministic given the random source.
    """
    rng = np.random.default_rng(rng)
    t = np.arange(n_reps) * dt_slow
    kind = model.kind

    if kind is ActivityLabel.BREATHING:
        theta = 2.0 * np.pi * model.rate * t + model.phase
        if model.jitter > 0:
            theta = theta + model.jitter * np.cumsum(rng.normal(0.0, 0.1, n_reps))
        x = np.sin(theta)
    elif kind is ActivityLabel.TALKING:
        wander = np.cumsum(rng.normal(0.0, 1.0, n_reps)) / max(np.sqrt(n_reps), 1.0)
        rate = model.rate * (1.0 + model.jitter * 0.5 * np.tanh(wander))
        theta = 2.0 * np.pi * np.cumsum(rate) * dt_slow + model.phase
        theta = theta + model.jitter * 0.3 * np.cumsum(rng.normal(0.0, 0.2, n_reps))
        x = np.sin(theta)
    else:  # MOVING: bounded random walk, re-scaled to unit peak
        walk = np.cumsum(rng.normal(0.0, 1.0, n_reps))
        walk = walk + model.jitter * rng.normal(0.0, 0.25, n_reps)
        peak = np.max(np.abs(walk))
        x = walk / peak if peak > 0 else walk

    delay_offsets = model.delay_excursion * x
    amp_factors = (1.0 + model.amp_excursion * x).astype(np.complex128)
    return delay_offsets, amp_factors


def motion_trajectory(model: MotionModel, m: int, dt_slow: float = 0.1, rng=None) -> tuple[float, complex]:
    """Trajectory at repetition m: (delay_offset seconds, complex amp factor).

    Generates the path from repetition 0 through m with draws from rng and
    returns the final point, so equal seeds give identical trajectories.
    """
    if m < 0:
        raise ValueError("repetition index must be >= 0")
    offsets, factors = motion_path(model, m + 1, dt_slow, rng)
    return float(offsets[m]), complex(factors[m])


@dataclass(frozen=True)
class Scene:
    """Everything the simulator needs: target paths with motion, static clutter, noise.

    noise_sigma is the per-sample standard deviation of the real and of the
    imaginary noise component (zero for noise-free scenes).
    """

    target_paths: tuple[tuple[PathComponent, MotionModel], ...] = ()
    clutter_paths: tuple[PathComponent, ...] = ()
    noise_sigma: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "target_paths", tuple(self.target_paths))
        object.__setattr__(self, "clutter_paths", tuple(self.clutter_paths))
        if len(self.target_paths) + len(self.clutter_paths) < 1:
            raise ConfigError("a scene needs at least one propagation path")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")


def _check_delay_window(delays, cfg: RadarConfig):
    delays = np.asarray(delays, dtype=np.float64)
    if delays.size and (delays.min() < 0 or delays.max() >= cfg.fast_time_window):
        raise ConfigError(
            f"path delay outside the fast-time window [0, {cfg.fast_time_window:.3e}) s: "
            f"range [{delays.min():.3e}, {delays.max():.3e}]"
        )


def _shifted_pulses(freqs, spectrum, delays) -> np.ndarray:
    """Columns of band-limited pulses at the given delays (linear-phase shift)."""
    phase = np.exp(-2j * np.pi * np.outer(freqs, np.asarray(delays)))
    return np.fft.ifft(spectrum[:, None] * phase, axis=0)


def simulate_received(scene: Scene, cfg: RadarConfig, rng=None) -> CirMatrix:
    """Simulate the received CIR matrix for a scene.

    Column m is the superposition of every target path evaluated at its
    delay/amplitude trajectory at time m*dt_slow, the static clutter paths,
    and circularly-symmetric white Gaussian noise.
    """
    rng = np.random.default_rng(rng)
    n, m = cfg.n_fast, cfg.m_slow
    freqs, spectrum = _pulse_spectrum(cfg)
    data = np.zeros((n, m), dtype=np.complex128)

    static = np.zeros(n, dtype=np.complex128)
    for path in scene.clutter_paths:
        _check_delay_window([path.delay], cfg)
        pulse = _shifted_pulses(freqs, spectrum, [path.delay])[:, 0]
        static += path.amplitude * np.exp(-2j * np.pi * cfg.center_freq * path.delay) * pulse
    data += static[:, None]

    for path, motion in scene.target_paths:
        offsets, amp_factors = motion_path(motion, m, cfg.dt_slow, rng)
        delays = path.delay + offsets
        _check_delay_window(delays, cfg)
        carrier = np.exp(-2j * np.pi * cfg.center_freq * delays)
        pulses = _shifted_pulses(freqs, spectrum, delays)
        data += pulses * (path.amplitude * amp_factors * carrier)[None, :]

    if scene.noise_sigma > 0:
        data += scene.noise_sigma * (rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m)))

    return CirMatrix(data, cfg.dt_fast, cfg.dt_slow)


_SEATS = ("front", "rear", "middle")
_SEGMENTS_PER_PARTICIPANT = 4


def _random_clutter(rng, cfg: RadarConfig, n_paths: int) -> tuple[PathComponent, ...]:
    paths = []
    for _ in range(n_paths):
        amp = rng.uniform(0.5, 2.0) * np.exp(2j * np.pi * rng.uniform())
        delay = rng.uniform(0.02, 0.90) * cfg.fast_time_window
        paths.append(PathComponent(complex(amp), float(delay)))
    return tuple(paths)


def _random_target(rng, cfg: RadarConfig, kind: ActivityLabel,
                   template: tuple[PathComponent, MotionModel] | None) -> tuple[PathComponent, MotionModel]:
    if template is not None:
        path, motion = template
        return path, replace(motion, phase=float(rng.uniform(0.0, 2.0 * np.pi)))
    amp = rng.uniform(0.3, 1.0) * np.exp(2j * np.pi * rng.uniform())
    margin = 2.0 * _DEFAULT_MOTION[kind]["delay_excursion"]
    delay = rng.uniform(0.1 * cfg.fast_time_window + margin, 0.8 * cfg.fast_time_window - margin)
    base = _DEFAULT_MOTION[kind]
    motion = MotionModel(
        kind=kind,
        rate=float(base["rate"] * rng.uniform(0.75, 1.3)),
        delay_excursion=float(base["delay_excursion"] * rng.uniform(0.7, 1.3)),
        amp_excursion=float(base["amp_excursion"] * rng.uniform(0.7, 1.3)),
        jitter=float(base["jitter"]),
        phase=float(rng.uniform(0.0, 2.0 * np.pi)),
    )
    return PathComponent(complex(amp), float(delay), is_target=True), motion


def synth_dataset(counts, cfg: RadarConfig | None = None, rng=None, *,
                  scene: Scene | None = None, sensor_noise: float = 1e-3,
                  clutter_paths: int = 4) -> list[SampleRecord]:
    """Generate a labeled synthetic dataset with per-class sample counts.

    counts maps ActivityLabel (or its string value) to a non-negative count.
    Empty samples contain clutter and noise only; occupied samples add one
    randomized target path with the motion family of their class.  When a
    scene is given, its clutter, noise level, and any matching target
    templates are used instead of randomized ones (target phase is still
    re-randomized per sample).  Deterministic given the seed.

    Occupied samples are spread over two cars (3:2 pattern) and empty samples
    are assigned to car2 only, mirroring the acquisition protocol the split
    logic expects.
    """
    cfg = cfg or RadarConfig()
    rng = np.random.default_rng(rng)
    wanted: dict[ActivityLabel, int] = {}
    for key, value in dict(counts).items():
        label = key if isinstance(key, ActivityLabel) else ActivityLabel.from_string(str(key))
        if int(value) < 0:
            raise ConfigError(f"negative sample count for {label.value}")
        wanted[label] = int(value)

    noise_sigma = scene.noise_sigma if scene is not None else sensor_noise
    templates: dict[ActivityLabel, tuple[PathComponent, MotionModel]] = {}
    if scene is not None:
        for path, motion in scene.target_paths:
            templates[motion.kind] = (path, motion)

    records: list[SampleRecord] = []
    for label in ActivityLabel:
        total = wanted.get(label, 0)
        for i in range(total):
            clutter = scene.clutter_paths if scene is not None else _random_clutter(rng, cfg, clutter_paths)
            if label.occupied:
                targets = (_random_target(rng, cfg, label, templates.get(label)),)
            else:
                targets = ()
            sample_scene = Scene(target_paths=targets, clutter_paths=clutter, noise_sigma=noise_sigma)
            cir = simulate_received(sample_scene, cfg, rng)
            if label.occupied:
                participant = f"p{label.value[0]}{i // _SEGMENTS_PER_PARTICIPANT:03d}"
                seat = _SEATS[(i // _SEGMENTS_PER_PARTICIPANT) % len(_SEATS)]
                car = "car1" if i % 5 < 3 else "car2"
                seg = i % _SEGMENTS_PER_PARTICIPANT
                records.append(SampleRecord(cir, label, car, seat, participant, seg))
            else:
                records.append(SampleRecord(cir, label, "car2", None, None, i))
    return records


def _parse_complex_pair(value: str, where: str) -> complex:
    parts = value.split()
    try:
        if len(parts) == 1:
            return complex(float(parts[0]))
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise ConfigError(f"{where}: expected 're' or 're im', got {value!r}")


def parse_scene(text: str, source: str = "<scene>") -> Scene:
    """Parse the plain-text scene format into a Scene.

    Format: top-level `key = value` lines plus repeated `[clutter]` and
    `[target]` sections, each a block of `key = value` lines.  Clutter keys:
    amplitude (one or two floats: re [im]), delay (seconds).  Target keys add
    activity, rate, delay_excursion, amp_excursion, jitter, phase.  `#`
    starts a comment.  See docs/formats.md for the full schema.
    """
    noise_sigma = 0.0
    clutter: list[PathComponent] = []
    targets: list[tuple[PathComponent, MotionModel]] = []
    section: dict[str, str] | None = None
    section_kind = ""
    section_line = 0

    def close_section():
        nonlocal section
        if section is None:
            return
        where = f"{source}:{section_line}"
        try:
            amplitude = _parse_complex_pair(section.pop("amplitude"), where)
            delay = float(section.pop("delay"))
        except KeyError as missing:
            raise ConfigError(f"{where}: [{section_kind}] section missing key {missing}") from None
        if section_kind == "clutter":
            if section:
                raise ConfigError(f"{where}: unknown clutter keys {sorted(section)}")
            clutter.append(PathComponent(amplitude, delay))
        else:
            kind = ActivityLabel.from_string(section.pop("activity", "breathing"))
            defaults = MotionModel.default_for(kind)
            motion = MotionModel(
                kind=kind,
                rate=float(section.pop("rate", defaults.rate)),
                delay_excursion=float(section.pop("delay_excursion", defaults.delay_excursion)),
                amp_excursion=float(section.pop("amp_excursion", defaults.amp_excursion)),
                jitter=float(section.pop("jitter", defaults.jitter)),
                phase=float(section.pop("phase", 0.0)),
            )
            if section:
                raise ConfigError(f"{where}: unknown target keys {sorted(section)}")
            targets.append((PathComponent(amplitude, delay, is_target=True), motion))
        section = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            close_section()
            name = line.strip("[] ").lower()
            if name not in ("clutter", "target"):
                raise ConfigError(f"{source}:{lineno}: unknown section [{name}]")
            section, section_kind, section_line = {}, name, lineno
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, value = line.partition("=")
        key, value = key.strip().lower(), value.strip()
        if section is not None:
            section[key] = value
        elif key == "noise_sigma":
            try:
                noise_sigma = float(value)
            except ValueError:
                raise ConfigError(f"{source}:{lineno}: noise_sigma must be a number") from None
        else:
            raise ConfigError(f"{source}:{lineno}: unknown top-level key {key!r}")
    close_section()

    try:
        return Scene(target_paths=tuple(targets), clutter_paths=tuple(clutter), noise_sigma=noise_sigma)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_scene(path) -> Scene:
    """Read and parse a scene configuration file."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigError(f"cannot read scene file {path}: {exc}") from None
    return parse_scene(text, source=str(path))
