"""Common-path birefringent interferometer model and Fourier reconstruction.

The interferometer is modeled as a wavelength-dependent photon-transmission
modulator: translating the wedge by x changes the replica delay linearly,
tau(x) = delay_per_um * (x - x_zero). Scanning x while histogramming arrival
times yields an interferogram cube whose Fourier transform along x is the
time-resolved emission spectrum.

Wedge dispersion is ignored (the delay slope is taken wavelength
independent); the calibration step absorbs the overall scale.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.signal import hilbert

from .errors import CalibrationError, ConfigurationError, DomainError
from .tcspc import build_histogram, read_histogram_csv, write_histogram_csv
from .units import C_NM_PER_FS


@dataclass(frozen=True)
class TwinsSpec:
    delay_per_um_fs: float = 1.0
    position_min_um: float = 0.0
    position_max_um: float = 320.0
    visibility: float = 0.9
    insertion_loss: float = 0.5
    x_zero_um: float = 160.0  # zero delay mid-scan so apodization keeps the fringe packet

    def __post_init__(self):
        if self.delay_per_um_fs == 0:
            raise DomainError("delay_per_um_fs must be nonzero")
        if not 0.0 <= self.visibility <= 1.0:
            raise DomainError("visibility must be in [0, 1]")
        if not 0.0 < self.insertion_loss <= 1.0:
            raise DomainError("insertion_loss must be in (0, 1]")
        if self.position_max_um <= self.position_min_um:
            raise DomainError("position range must have positive extent")


def transmission(emission_nm, position_um, spec: TwinsSpec):
    """Photon-survival probability through the interferometer at wedge position x.

    p = insertion_loss * 0.5 * (1 + visibility * cos(2 pi c tau(x) / lambda)).
    """
    if not spec.position_min_um <= position_um <= spec.position_max_um:
        raise DomainError(
            f"position {position_um} um outside scan range "
            f"[{spec.position_min_um}, {spec.position_max_um}] um")
    lam = np.asarray(emission_nm, dtype=float)
    tau_fs = spec.delay_per_um_fs * (position_um - spec.x_zero_um)
    phase = 2.0 * np.pi * C_NM_PER_FS * tau_fs / lam
    p = spec.insertion_loss * 0.5 * (1.0 + spec.visibility * np.cos(phase))
    return p if p.ndim else float(p)


def fringe_period_um(wavelength_nm, spec: TwinsSpec):
    """Interferogram period in wedge position for a monochromatic input."""
    return wavelength_nm / (C_NM_PER_FS * abs(spec.delay_per_um_fs))


def nyquist_spacing_um(min_wavelength_nm, spec: TwinsSpec):
    return min_wavelength_nm / (2.0 * C_NM_PER_FS * abs(spec.delay_per_um_fs))


@dataclass
class InterferogramCube:
    positions_um: np.ndarray
    histograms: list  # one Histogram per position, shared bin axis
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        pos = np.asarray(self.positions_um, dtype=float)
        if len(pos) != len(self.histograms):
            raise ConfigurationError("one histogram per position required")
        if len(pos) >= 2:
            d = np.diff(pos)
            if np.any(d <= 0):
                raise ConfigurationError("positions must be strictly increasing")
            if not np.allclose(d, d[0], rtol=1e-9, atol=1e-9):
                raise ConfigurationError("positions must be uniformly spaced")
        bw = {h.bin_width_ps for h in self.histograms}
        nb = {len(h.counts) for h in self.histograms}
        t0 = {h.t0_ps for h in self.histograms}
        if len(bw) > 1 or len(nb) > 1 or len(t0) > 1:
            raise ConfigurationError("histograms must share their bin axis")
        self.positions_um = pos

    def spacing_um(self):
        return float(self.positions_um[1] - self.positions_um[0])

    def counts_matrix(self):
        return np.stack([h.counts.astype(float) for h in self.histograms])

    def time_axis_ps(self):
        return self.histograms[0].bin_centers_ps()


@dataclass
class TimeFrequencyMap:
    wavelength_axis_nm: np.ndarray
    time_axis_ps: np.ndarray
    intensity: np.ndarray  # [wavelength, time], >= 0

    def __post_init__(self):
        if np.any(np.diff(self.wavelength_axis_nm) <= 0) or np.any(np.diff(self.time_axis_ps) <= 0):
            raise ConfigurationError("map axes must be strictly increasing")
        if np.any(self.intensity < 0):
            raise ConfigurationError("map intensity must be >= 0")


@dataclass(frozen=True)
class TwinsCalibration:
    delay_per_um_fs: float
    x_zero_um: float
    fringe_period_um: float


def _max_workers():
    env = os.environ.get("EPPS_THREADS", "")
    try:
        return max(1, int(env))
    except ValueError:
        return 1


def acquire_cube(source, sample, herald_det, signal_det, twins: TwinsSpec,
                 positions_um, per_position_run, bin_width_ps=16,
                 window_ps=20_000, t0_ps=-2_000) -> InterferogramCube:
    """One simulated TCSPC histogram per wedge position.

    Positions must satisfy Nyquist sampling for the sample's shortest
    emission wavelength. Each position is an independent simulation with a
    seed derived from (run seed, position index), so the cube is reproducible
    and positions may be simulated concurrently (EPPS_THREADS caps workers).
    """
    from .events import CH_HERALD, CH_SIGNAL, simulate_stream

    positions_um = np.asarray(positions_um, dtype=float)
    if len(positions_um) < 2:
        raise ConfigurationError("need at least two wedge positions")
    spacing = float(np.diff(positions_um)[0])
    limit = nyquist_spacing_um(sample.min_emission_nm(), twins)
    if spacing > limit * (1 + 1e-9):
        raise ConfigurationError(
            f"position spacing {spacing:.4g} um violates Nyquist; "
            f"required spacing <= {limit:.4g} um for "
            f"{sample.min_emission_nm():.4g} nm emission")

    def one(i):
        sub_seed = int(np.random.SeedSequence((per_position_run.seed, 2, i)).generate_state(1)[0])
        run = replace(per_position_run, seed=sub_seed, twins_position_um=float(positions_um[i]))
        stream = simulate_stream(source, sample, herald_det, signal_det, twins, run)
        return build_histogram(stream, CH_HERALD, CH_SIGNAL,
                               bin_width_ps=bin_width_ps, window_ps=window_ps,
                               t0_ps=t0_ps)

    workers = _max_workers()
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            hists = list(pool.map(one, range(len(positions_um))))
    else:
        hists = [one(i) for i in range(len(positions_um))]

    meta = {
        "duration_s_per_position": per_position_run.duration_s,
        "total_duration_s": per_position_run.duration_s * len(positions_um),
        "seed": per_position_run.seed,
        "bin_width_ps": bin_width_ps,
        "window_ps": window_ps,
        "t0_ps": t0_ps,
    }
    return InterferogramCube(positions_um, hists, meta)


def calibrate_delay(reference_cube: InterferogramCube, known_wavelength_nm) -> TwinsCalibration:
    """Delay slope and zero-delay position from a monochromatic reference scan.

    Fits the fringe frequency in the position domain (FFT peak refined by
    maximizing the periodogram) and locates the envelope maximum via the
    analytic signal.
    """
    x = reference_cube.positions_um
    interferogram = reference_cube.counts_matrix().sum(axis=1)
    ac = interferogram - interferogram.mean()
    n = len(x)
    dx = reference_cube.spacing_um()
    spectrum = np.abs(np.fft.rfft(ac))
    if len(spectrum) < 3:
        raise CalibrationError("reference scan too short")
    k_peak = 1 + int(np.argmax(spectrum[1:]))
    noise = np.median(spectrum[1:])
    if noise > 0 and spectrum[k_peak] / noise < 3.0:
        raise CalibrationError("reference interferogram SNR < 3")

    df = 1.0 / (n * dx)
    f0 = k_peak * df

    def neg_power(f):
        ph = np.exp(-2j * np.pi * f * x)
        return -np.abs(np.dot(ac, ph)) ** 2

    res = minimize_scalar(neg_power, bounds=(max(f0 - df, 0.5 * df), f0 + df),
                          method="bounded", options={"xatol": df * 1e-7})
    f_hat = float(res.x)
    n_fringes = f_hat * (x[-1] - x[0])
    if n_fringes < 10:
        raise CalibrationError(
            f"only {n_fringes:.1f} fringes in the reference scan; need >= 10")

    envelope = np.abs(hilbert(ac))
    i = int(np.argmax(envelope))
    x_zero = x[i]
    if 0 < i < n - 1:  # parabolic vertex refine
        y0, y1, y2 = envelope[i - 1], envelope[i], envelope[i + 1]
        denom = y0 - 2 * y1 + y2
        if denom != 0:
            x_zero = x[i] + 0.5 * dx * (y0 - y2) / denom
    delay = f_hat * known_wavelength_nm / C_NM_PER_FS
    return TwinsCalibration(delay_per_um_fs=delay, x_zero_um=float(x_zero),
                            fringe_period_um=1.0 / f_hat)


def reconstruct_map(cube: InterferogramCube, calibration: TwinsCalibration,
                    apodization="hann", dc_removal=True) -> TimeFrequencyMap:
    """Magnitude Fourier transform of the cube along wedge position.

    Per time bin: optional DC removal, apodization, real FFT along x; the
    position-frequency axis maps to wavelength via the calibrated delay
    slope. The k=0 (DC) component is discarded.
    """
    if apodization not in ("none", "hann"):
        raise ConfigurationError(f"unknown apodization {apodization!r}")
    data = cube.counts_matrix()  # [position, time]
    n = data.shape[0]
    dx = cube.spacing_um()
    if dc_removal:
        data = data - data.mean(axis=0, keepdims=True)
    if apodization == "hann":
        data = data * np.hanning(n)[:, None]
    spectrum = np.abs(np.fft.rfft(data, axis=0))  # [k, time]
    k = np.arange(1, spectrum.shape[0])
    freq_per_um = k / (n * dx)
    wavelength_nm = C_NM_PER_FS * abs(calibration.delay_per_um_fs) / freq_per_um
    # k ascending means wavelength descending; flip for increasing axes
    intensity = spectrum[1:][::-1]
    return TimeFrequencyMap(wavelength_nm[::-1], cube.time_axis_ps().astype(float),
                            intensity)


def save_cube(directory, cube: InterferogramCube):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "positions_um": [float(p) for p in cube.positions_um],
        "files": [],
        "metadata": cube.metadata,
    }
    for i, hist in enumerate(cube.histograms):
        name = f"position_{i:04d}.csv"
        write_histogram_csv(directory / name, hist)
        manifest["files"].append(name)
    (directory / "cube_manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_cube(directory) -> InterferogramCube:
    directory = Path(directory)
    manifest = json.loads((directory / "cube_manifest.json").read_text())
    hists = [read_histogram_csv(directory / name) for name in manifest["files"]]
    return InterferogramCube(np.asarray(manifest["positions_um"]), hists,
                             manifest.get("metadata", {}))


def write_map_csv(path, tf_map: TimeFrequencyMap):
    lines = ["wavelength_nm,time_ps,intensity"]
    for i, lam in enumerate(tf_map.wavelength_axis_nm):
        for j, t in enumerate(tf_map.time_axis_ps):
            lines.append(f"{lam:.4f},{t:g},{tf_map.intensity[i, j]:.6g}")
    Path(path).write_text("\n".join(lines) + "\n")
