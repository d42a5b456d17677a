"""Monte Carlo generation of timestamped photon-detection streams.

Three experiment topologies are supported: ``irf`` (signal and idler sent
straight to two detectors), ``hbt`` (heralded Hanbury-Brown-Twiss with the
signal split 50/50 over two arms) and ``fluorescence`` (signal excites a
sample, the emitted photon is detected, optionally through the TWINS
interferometer).

Timestamps are integer picoseconds since run start, so reruns with the same
seed are bit-identical and long runs accumulate no float drift.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError
from .spdc import SourceModel
from .units import FWHM_PER_SIGMA, PS_PER_NS, PS_PER_S

CH_HERALD = 0
CH_SIGNAL = 1
CH_HBT_T = 1
CH_HBT_R = 2

TOPOLOGIES = ("irf", "hbt", "fluorescence")

# simulation is generated in independently seeded time chunks; the per-channel
# detector pass afterwards runs over the merged stream so dead time is exact
# across chunk boundaries
CHUNK_S = 5.0


@dataclass(frozen=True)
class DetectorModel:
    efficiency: float = 1.0
    jitter_fwhm_ps: float = 0.0
    dead_time_ns: float = 0.0
    dark_rate_hz: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise DomainError("efficiency must be in [0, 1]")
        if self.jitter_fwhm_ps < 0 or self.dead_time_ns < 0 or self.dark_rate_hz < 0:
            raise DomainError("jitter, dead time and dark rate must be >= 0")


# combined start-stop response of a preset pair reproduces the measured IRFs:
# mpd/mpd -> sqrt(2)*184 ~ 260 ps, mpd/excelitas -> sqrt(184^2+571^2) ~ 600 ps
DETECTOR_PRESETS = {
    "mpd": DetectorModel(efficiency=0.35, jitter_fwhm_ps=184.0,
                         dead_time_ns=77.0, dark_rate_hz=50.0),
    "excelitas": DetectorModel(efficiency=0.60, jitter_fwhm_ps=571.0,
                               dead_time_ns=22.0, dark_rate_hz=500.0),
    "ideal": DetectorModel(),
}


@dataclass(frozen=True)
class EmitterSpecies:
    weight: float
    lifetime_ns: float
    emission_center_nm: float
    emission_fwhm_nm: float
    quantum_yield: float = 1.0

    def __post_init__(self):
        if self.weight < 0:
            raise DomainError("species weight must be >= 0")
        if self.lifetime_ns <= 0:
            raise DomainError("lifetime_ns must be > 0")
        if self.emission_fwhm_nm <= 0:
            raise DomainError("emission_fwhm_nm must be > 0")
        if not 0.0 <= self.quantum_yield <= 1.0:
            raise DomainError("quantum_yield must be in [0, 1]")


@dataclass(frozen=True)
class SampleModel:
    species: tuple
    absorption_prob: float = 1.0

    def __post_init__(self):
        if len(self.species) == 0:
            raise DomainError("sample needs at least one species")
        if sum(s.weight for s in self.species) <= 0:
            raise DomainError("species weights must not all be zero")
        if not 0.0 <= self.absorption_prob <= 1.0:
            raise DomainError("absorption_prob must be in [0, 1]")

    def min_emission_nm(self):
        return min(s.emission_center_nm - s.emission_fwhm_nm for s in self.species)


@dataclass(frozen=True)
class RunConfig:
    duration_s: float
    seed: int
    topology: str
    twins_position_um: float | None = None

    def __post_init__(self):
        if self.duration_s <= 0:
            raise DomainError("duration_s must be > 0")
        if self.topology not in TOPOLOGIES:
            raise DomainError(f"unknown topology {self.topology!r}")


@dataclass
class EventStream:
    channel: np.ndarray          # uint8, parallel to t_ps
    t_ps: np.ndarray             # int64, globally nondecreasing
    duration_s: float
    n_channels: int
    warnings: list = field(default_factory=list)

    def times(self, ch):
        return self.t_ps[self.channel == ch]

    def __len__(self):
        return len(self.t_ps)


def _rng(seed, *tags):
    return np.random.default_rng(np.random.SeedSequence((seed,) + tags))


def _dead_time_prune(times, dead_ps):
    if dead_ps <= 0 or len(times) == 0:
        return times
    kept = np.empty(len(times))
    n = 0
    last = -np.inf
    for t in times.tolist():
        if t - last >= dead_ps:
            kept[n] = t
            n += 1
            last = t
    return kept[:n]


def apply_detector(arrivals, det: DetectorModel, rng, duration_ps):
    """Run the detector chain over time-sorted candidate arrivals.

    ``arrivals`` is a pair (t_ps float array, accept_prob scalar or array).
    Each arrival survives with probability accept_prob * efficiency, is
    jittered by a Gaussian of the configured FWHM, then merged with dark
    counts and pruned by the nonparalyzable dead time. Returns sorted int64
    timestamps (events jittered below t=0 are dropped).
    """
    t, accept = arrivals
    t = np.asarray(t, dtype=float)
    p = np.broadcast_to(np.asarray(accept, dtype=float), t.shape) * det.efficiency
    keep = rng.random(len(t)) < p
    t = t[keep]
    if det.jitter_fwhm_ps > 0 and len(t):
        t = t + rng.normal(0.0, det.jitter_fwhm_ps / FWHM_PER_SIGMA, len(t))
    n_dark = rng.poisson(det.dark_rate_hz * duration_ps / PS_PER_S)
    if n_dark:
        t = np.concatenate([t, rng.random(n_dark) * duration_ps])
    t.sort()
    t = _dead_time_prune(t, det.dead_time_ns * PS_PER_NS)
    t = np.rint(t).astype(np.int64)
    return t[t >= 0]


def _fluorescence_batch(sample: SampleModel, n, rng):
    """Vectorized emission draw: (emitted mask, delay_ps, emission_nm)."""
    absorbed = rng.random(n) < sample.absorption_prob
    weights = np.array([s.weight for s in sample.species], dtype=float)
    weights /= weights.sum()
    idx = rng.choice(len(sample.species), size=n, p=weights)
    tau_ps = np.array([s.lifetime_ns for s in sample.species]) * PS_PER_NS
    delay_ps = rng.exponential(1.0, n) * tau_ps[idx]
    center = np.array([s.emission_center_nm for s in sample.species])
    sigma = np.array([s.emission_fwhm_nm for s in sample.species]) / FWHM_PER_SIGMA
    lam_nm = rng.normal(center[idx], sigma[idx])
    qy = np.array([s.quantum_yield for s in sample.species])
    emitted = absorbed & (rng.random(n) < qy[idx])
    return emitted, delay_ps, lam_nm


def sample_fluorescence(sample: SampleModel, rng):
    """Single emission draw; None when the photon is absorbed-and-lost or not absorbed."""
    emitted, delay_ps, lam_nm = _fluorescence_batch(sample, 1, rng)
    if not emitted[0]:
        return None
    return float(delay_ps[0]), float(lam_nm[0])


def simulate_stream(source: SourceModel, sample, herald_det: DetectorModel,
                    signal_det: DetectorModel, twins, run: RunConfig) -> EventStream:
    """End-to-end pair generation through the configured topology.

    Pair birth times follow a homogeneous Poisson process at the source pair
    rate; each pair's signal wavelength is drawn from the herald-conditioned
    density (the herald filter's spectral selection acts through that
    ensemble, so pair_rate_hz is the rate of filtered pairs). Externally this
    is a pure function of (configuration, seed).
    """
    if run.topology == "fluorescence":
        if sample is None:
            raise ConfigurationError("fluorescence topology requires a sample")
    else:
        if sample is not None:
            raise ConfigurationError(f"{run.topology} topology takes no sample")
        if twins is not None:
            raise ConfigurationError("TWINS is only placed in the fluorescence path")
    if twins is not None and run.twins_position_um is None:
        raise ConfigurationError("twins_position_um required when TWINS is present")

    from .twins import transmission as twins_transmission  # local: avoids import cycle

    rate = source.pump.pair_rate_hz
    duration_ps = run.duration_s * PS_PER_S
    if rate > 0:
        source.conditioned_jsd()  # validates herald filter / density overlap up front

    n_channels = 3 if run.topology == "hbt" else 2
    herald_t, herald_p = [], []
    signal_arrivals = {ch: ([], []) for ch in range(1, n_channels)}

    n_chunks = max(1, int(np.ceil(run.duration_s / CHUNK_S)))
    chunk_ps = duration_ps / n_chunks
    for k in range(n_chunks):
        rng = _rng(run.seed, 0, k)
        n = rng.poisson(rate * run.duration_s / n_chunks)
        if n == 0:
            continue
        birth_ps = np.sort(k * chunk_ps + rng.random(n) * chunk_ps)
        herald_t.append(birth_ps)
        herald_p.append(np.ones(n))

        if run.topology == "irf":
            signal_arrivals[CH_SIGNAL][0].append(birth_ps)
            signal_arrivals[CH_SIGNAL][1].append(np.ones(n))
        elif run.topology == "hbt":
            to_t = rng.random(n) < 0.5
            for ch, mask in ((CH_HBT_T, to_t), (CH_HBT_R, ~to_t)):
                signal_arrivals[ch][0].append(birth_ps[mask])
                signal_arrivals[ch][1].append(np.ones(mask.sum()))
        else:  # fluorescence
            emitted, delay_ps, lam_nm = _fluorescence_batch(sample, n, rng)
            t_em = birth_ps[emitted] + delay_ps[emitted]
            if twins is not None:
                p_em = twins_transmission(lam_nm[emitted], run.twins_position_um, twins)
            else:
                p_em = np.ones(emitted.sum())
            signal_arrivals[CH_SIGNAL][0].append(t_em)
            signal_arrivals[CH_SIGNAL][1].append(np.asarray(p_em))

    def _concat(parts):
        return np.concatenate(parts) if parts else np.empty(0)

    channels, times = [], []
    det_for = {CH_HERALD: herald_det}
    arrivals_for = {CH_HERALD: (_concat(herald_t), _concat(herald_p))}
    for ch in range(1, n_channels):
        det_for[ch] = signal_det
        t = _concat(signal_arrivals[ch][0])
        p = _concat(signal_arrivals[ch][1])
        order = np.argsort(t, kind="stable")
        arrivals_for[ch] = (t[order], p[order])

    for ch in range(n_channels):
        out = apply_detector(arrivals_for[ch], det_for[ch], _rng(run.seed, 1, ch),
                             duration_ps)
        channels.append(np.full(len(out), ch, dtype=np.uint8))
        times.append(out)

    channel = np.concatenate(channels)
    t_ps = np.concatenate(times)
    order = np.lexsort((channel, t_ps))
    stream = EventStream(channel[order], t_ps[order], run.duration_s, n_channels)
    dark_total = herald_det.dark_rate_hz + (n_channels - 1) * signal_det.dark_rate_hz
    if rate == 0 and dark_total == 0:
        stream.warnings.append("empty-stream: zero pair rate and zero dark rates")
    return stream
