"""Synthetic signals with known cycle locations, shapes and modulators.

Three generators are provided:

* ``synth_phenomenological`` renders ``a(t) s(phi(t)) + trend + noise`` with a
  1-periodic wave-shape ``s`` and records the cycle onsets ``phi^{-1}(n)``.
* ``synth_generalized`` renders a sum of amplitude/phase modulated harmonics.
* ``synth_waveshape_model`` superposes individually shaped cycles emitted by a
  ``DynamicsProcess`` (normal/ectopic beats, random walks on the amplitude and
  dilation of a template, ...).

Templates live on the phase interval [-1/2, 1/2] and vanish at its ends; a
cycle with amplitude ``a`` and frequency ``f`` is the function ``a s(f t)``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .timeseries import DDMapWarning, LandmarkSequence, TimeSeries, write_csv, write_timeseries

TEMPLATE_NAMES = ("gauss_bump", "ecg_like", "pvc_like", "abp_like", "db4_like")

# (center, width, amplitude) triples in phase units.
_BUMPS = {
    "gauss_bump": [(0.0, 0.08, 1.0)],
    "ecg_like": [
        (-0.18, 0.025, 0.12),   # P
        (-0.03, 0.008, -0.15),  # Q
        (0.0, 0.010, 1.0),      # R
        (0.03, 0.008, -0.25),   # S
        (0.22, 0.040, 0.30),    # T
    ],
    "pvc_like": [
        (0.0, 0.030, 1.2),
        (0.07, 0.025, -0.35),
        (0.24, 0.050, -0.35),
    ],
    "abp_like": [
        (-0.15, 0.060, 1.0),
        (0.10, 0.080, 0.45),
    ],
    "db4_like": [
        (-0.20, 0.035, 0.15),
        (-0.10, 0.035, -0.45),
        (-0.02, 0.035, 1.0),
        (0.06, 0.035, -0.70),
        (0.14, 0.035, 0.25),
    ],
}


def _window(u: np.ndarray) -> np.ndarray:
    # cos^4 vanishes to fourth order at +-1/2, so the product stays C^2 when
    # extended by zero.
    u = np.asarray(u, dtype=float)
    w = np.cos(np.pi * u) ** 4
    return np.where(np.abs(u) <= 0.5, w, 0.0)


def _closed_form(name: str, u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    acc = np.zeros_like(u)
    for center, width, amp in _BUMPS[name]:
        acc += amp * np.exp(-0.5 * ((u - center) / width) ** 2)
    return acc * _window(u)


@dataclass(frozen=True)
class WaveShapeTemplate:
    """Samples of a compactly supported wave-shape function on [-1/2, 1/2].

    Calling the template evaluates a cubic spline through the samples and
    returns 0 outside the support.
    """

    grid: np.ndarray
    values: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.shape != values.shape or grid.ndim != 1:
            raise ValueError("grid and values must be 1-D arrays of equal length")
        if abs(grid[0] + 0.5) > 1e-12 or abs(grid[-1] - 0.5) > 1e-12:
            raise ValueError("template grid must span [-1/2, 1/2]")
        if abs(values[0]) > 1e-12 or abs(values[-1]) > 1e-12:
            raise ValueError("template must vanish at the ends of its support")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_spline", CubicSpline(grid, values, bc_type="clamped"))

    @property
    def resolution(self) -> int:
        return self.grid.size

    def __call__(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        inside = np.abs(u) <= 0.5
        out = np.zeros_like(u)
        out[inside] = self._spline(u[inside])
        return out

    def periodic(self, u) -> np.ndarray:
        """Evaluate the 1-periodic extension of the template."""
        u = np.asarray(u, dtype=float)
        return self(u - np.round(u))


def make_template(name: str, resolution: int = 512) -> WaveShapeTemplate:
    """Sample one of the closed-form templates on ``resolution`` grid points.

    ``ecg_like`` has P, Q, R, S and T deflections with R the global maximum;
    ``pvc_like`` is a wide ectopic complex with an inverted T wave.
    """
    if name not in _BUMPS:
        raise ValueError(f"unknown template {name!r}; choose from {', '.join(TEMPLATE_NAMES)}")
    if resolution < 32:
        raise ValueError("resolution too small (need at least 32 samples)")
    grid = np.linspace(-0.5, 0.5, int(resolution))
    values = _closed_form(name, grid)
    values[0] = values[-1] = 0.0
    return WaveShapeTemplate(grid, values, name)


def manifold_point(template: WaveShapeTemplate, a: float, f: float, t=None) -> np.ndarray:
    """The cycle ``t -> a s(f t)``, sampled at ``t`` (default: the template grid).

    The pair ``(a, f)`` is a chart coordinate on the one-chart manifold
    generated by the template, so ``f`` must exceed 1 and ``a`` must be
    positive.
    """
    if not a > 0:
        raise ValueError("amplitude must be positive")
    if not f > 1:
        raise ValueError("frequency outside chart domain (need f > 1)")
    t = template.grid if t is None else np.asarray(t, dtype=float)
    return a * template(f * t)


# ---------------------------------------------------------------------------
# phenomenological model


@dataclass
class PhenomenologicalSpec:
    """Parameters of ``f(t) = a(t) s(phi(t)) + T(t) + noise``.

    ``template`` is the single cycle of the 1-periodic wave-shape function.
    ``inst_freq`` (``phi'``) is optional; finite differences are used
    without it.
    """

    amplitude: Callable[[np.ndarray], np.ndarray]
    phase: Callable[[np.ndarray], np.ndarray]
    template: WaveShapeTemplate
    fs: float
    duration: float
    epsilon: float = 0.01
    trend: Callable[[np.ndarray], np.ndarray] | None = None
    noise_std: float = 0.0
    inst_freq: Callable[[np.ndarray], np.ndarray] | None = None
    seed: int | None = 0
    description: dict = field(default_factory=dict)

    def sample_times(self) -> np.ndarray:
        return np.arange(int(np.floor(self.duration * self.fs))) / self.fs

    def phi_prime(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.inst_freq is not None:
            return np.asarray(self.inst_freq(t), dtype=float) * np.ones_like(t)
        h = 1e-5
        return (self.phase(t + h) - self.phase(t - h)) / (2 * h)


@dataclass(frozen=True)
class SlowVariationReport:
    amplitude_ratio: float
    phase_ratio: float
    epsilon: float

    @property
    def passed(self) -> bool:
        return self.amplitude_ratio <= self.epsilon and self.phase_ratio <= self.epsilon


def _eval(fn, t: np.ndarray) -> np.ndarray:
    return np.asarray(fn(t), dtype=float) * np.ones_like(t)


def slow_variation_check(spec: PhenomenologicalSpec) -> SlowVariationReport:
    """Largest ``|a'|/phi'`` and ``|phi''|/phi'`` on the sample grid."""
    t = spec.sample_times()
    dt = 1.0 / spec.fs
    a = _eval(spec.amplitude, t)
    phi = _eval(spec.phase, t)
    da = np.gradient(a, dt, edge_order=2)
    dphi = np.gradient(phi, dt, edge_order=2)
    ddphi = np.gradient(dphi, dt, edge_order=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = float(np.max(np.abs(da) / dphi))
        r2 = float(np.max(np.abs(ddphi) / dphi))
    return SlowVariationReport(r1, r2, spec.epsilon)


def _invert_monotone(fn, target: float, lo: float, hi: float, tol: float = 1e-9) -> float:
    flo = fn(lo) - target
    if flo == 0:
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = fn(mid) - target
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def phase_crossings(phase: Callable, t0: float, t1: float, tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Times in [t0, t1] where a strictly increasing phase hits an integer."""
    p0 = float(phase(np.asarray(t0)))
    p1 = float(phase(np.asarray(t1)))
    ns = np.arange(int(np.ceil(p0)), int(np.floor(p1)) + 1)
    scalar = lambda s: float(phase(np.asarray(s)))  # noqa: E731
    times = np.array([_invert_monotone(scalar, float(n), t0, t1, tol) for n in ns])
    return ns, times


@dataclass
class SyntheticDataset:
    """A signal together with the ground truth that generated it."""

    signal: TimeSeries
    true_landmarks: LandmarkSequence
    landmark_times: np.ndarray
    amplitudes: np.ndarray
    frequencies: np.ndarray
    labels: np.ndarray
    modulators: dict = field(default_factory=dict)
    cycles: list = field(default_factory=list)
    cycle_starts: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.true_landmarks)
        if not (len(self.amplitudes) == len(self.frequencies) == len(self.labels) == n):
            raise ValueError("landmark count must equal cycle-parameter count")

    def truth_columns(self):
        return (
            ["landmark_sample", "a", "f", "class"],
            [self.true_landmarks.indices, np.asarray(self.amplitudes, float),
             np.asarray(self.frequencies, float), np.asarray(self.labels, dtype=np.int64)],
        )

    def export(self, out_dir: str | Path) -> list[Path]:
        """Write ``signal.csv``, ``truth.csv`` and the ``dataset.json`` sidecar."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / "signal.csv", out / "truth.csv", out / "dataset.json"]
        write_timeseries(paths[0], self.signal)
        write_csv(paths[1], *self.truth_columns())
        sidecar = {"fs": self.signal.fs, "n_samples": len(self.signal), **self.metadata}
        paths[2].write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return paths


def synth_phenomenological(spec: PhenomenologicalSpec) -> SyntheticDataset:
    t = spec.sample_times()
    if t.size < 2:
        raise ValueError("duration too short for the sampling rate")
    a = _eval(spec.amplitude, t)
    phi = _eval(spec.phase, t)
    if np.any(np.diff(phi) <= 0):
        raise ValueError("phase must be strictly increasing on the sample grid")
    if np.any(a <= 0):
        raise ValueError("amplitude must be positive")
    rng = np.random.default_rng(spec.seed)
    x = a * spec.template.periodic(phi)
    if spec.trend is not None:
        x = x + _eval(spec.trend, t)
    if spec.noise_std > 0:
        x = x + rng.normal(0.0, spec.noise_std, t.size)

    _, tn = phase_crossings(spec.phase, float(t[0]), float(t[-1]))
    idx = np.round(tn * spec.fs).astype(np.int64)
    keep = np.concatenate([[True], np.diff(idx) > 0]) & (idx < t.size)
    tn, idx = tn[keep], idx[keep]
    report = slow_variation_check(spec)
    meta = {
        "generator": "phenomenological",
        "seed": spec.seed,
        "epsilon": spec.epsilon,
        "noise_std": spec.noise_std,
        "template": spec.template.name,
        "slow_variation": {"amplitude_ratio": report.amplitude_ratio,
                           "phase_ratio": report.phase_ratio,
                           "passed": report.passed},
        **spec.description,
    }
    return SyntheticDataset(
        signal=TimeSeries(x, spec.fs),
        true_landmarks=LandmarkSequence(idx, spec.fs),
        landmark_times=tn,
        amplitudes=_eval(spec.amplitude, tn),
        frequencies=spec.phi_prime(tn),
        labels=np.zeros(tn.size, dtype=np.int64),
        modulators={"amplitude": a, "inst_freq": spec.phi_prime(t)},
        metadata=meta,
    )


def cycle_approximation_error(spec: PhenomenologicalSpec, points_per_cycle: int = 2001) -> float:
    """Largest sup-distance between an observed cycle and its frozen-parameter twin.

    For every onset ``t_n = phi^{-1}(n)`` whose window fits in the recording,
    compares ``A(t_n + t) s(phi(t_n + t))`` with ``A(t_n) s(phi'(t_n) t)`` over
    ``|t| <= 1 / (2 phi'(t_n))`` and returns the maximum over ``n``.
    """
    _, tn = phase_crossings(spec.phase, 0.0, spec.duration)
    worst = 0.0
    for t_n in tn:
        f_n = float(spec.phi_prime(np.asarray([t_n]))[0])
        half = 0.5 / f_n
        if t_n - half < 0 or t_n + half > spec.duration:
            continue
        tau = np.linspace(-half, half, points_per_cycle)
        observed = _eval(spec.amplitude, t_n + tau) * spec.template.periodic(_eval(spec.phase, t_n + tau))
        frozen = float(_eval(spec.amplitude, np.asarray([t_n]))[0]) * spec.template(f_n * tau)
        worst = max(worst, float(np.max(np.abs(observed - frozen))))
    return worst


# ---------------------------------------------------------------------------
# generalized (multi-harmonic) model


def synth_generalized(
    amplitudes: Sequence[Callable],
    phases: Sequence[Callable],
    fs: float,
    duration: float,
    noise_std: float = 0.0,
    trend: Callable | None = None,
    epsilon: float = 0.1,
    seed: int | None = 0,
) -> TimeSeries:
    """Render ``A0(t) + sum_k A_k(t) cos(2 pi phi_k(t)) + noise``.

    ``amplitudes[k-1]`` and ``phases[k-1]`` describe the k-th harmonic and
    ``trend`` plays the role of ``A0``. A ``DDMapWarning`` is emitted when a
    harmonic's instantaneous frequency strays from ``k phi_1'`` by more than
    ``epsilon phi_1'``.
    """
    if len(amplitudes) == 0 or len(amplitudes) != len(phases):
        raise ValueError("need K >= 1 harmonics with one phase per amplitude")
    t = np.arange(int(np.floor(duration * fs))) / fs
    dt = 1.0 / fs
    amps = [_eval(A, t) for A in amplitudes]
    phis = [_eval(p, t) for p in phases]
    if np.any(amps[0] <= 0):
        raise ValueError("the fundamental amplitude A_1 must be positive")
    dphi1 = np.gradient(phis[0], dt, edge_order=2)
    if np.any(dphi1 <= 0):
        raise ValueError("the fundamental phase must be strictly increasing")
    violations = []
    for k, phi_k in enumerate(phis[1:], start=2):
        dev = np.max(np.abs(np.gradient(phi_k, dt, edge_order=2) - k * dphi1) / dphi1)
        if dev > epsilon:
            violations.append((k, float(dev)))
    if violations:
        detail = ", ".join(f"k={k}: {d:.3g}" for k, d in violations)
        warnings.warn(f"harmonic frequency constraint violated (epsilon={epsilon}): {detail}",
                      DDMapWarning, stacklevel=2)
    x = np.zeros_like(t) if trend is None else _eval(trend, t)
    for A, phi in zip(amps, phis):
        x = x + A * np.cos(2 * np.pi * phi)
    if noise_std > 0:
        x = x + np.random.default_rng(seed).normal(0.0, noise_std, t.size)
    return TimeSeries(x, fs)


# ---------------------------------------------------------------------------
# wave-shape oscillatory model

PROCESS_KINDS = ("iid", "random_walk", "two_class_markov", "scripted")

_DEFAULTS = {
    "iid": dict(a_range=(0.75, 1.25), f_range=(2.0, 9.0), grid=None, period=1.0, jitter=0.0, start=1.0),
    "random_walk": dict(a0=1.0, f0=1.5, a_step=0.01, f_step=0.01, a_range=(0.5, 1.5),
                        f_range=(1.1, 3.0), period=1.0, jitter=0.0, start=1.0),
    "two_class_markov": dict(ectopic_fraction=0.1, ectopic_persistence=0.0, rr=0.9, rr_jitter=0.03,
                             prematurity=0.65, compensation=1.35, a_normal=1.0, a_ectopic=1.0,
                             f_normal=1.25, f_ectopic=1.25, am_depth=0.0, am_freq=0.25,
                             a_jitter=0.0, start=1.0),
    "scripted": dict(),
}
for _d in _DEFAULTS.values():
    _d["n_cycles"] = None


@dataclass
class CycleSchedule:
    """Per-cycle output of a ``DynamicsProcess``."""

    times: np.ndarray
    amplitudes: np.ndarray
    frequencies: np.ndarray
    labels: np.ndarray
    modulator: np.ndarray | None = None


@dataclass
class DynamicsProcess:
    """Generator of successive cycle parameters and onset times.

    ``kind`` selects the mechanism:

    ``iid``
        independent ``(a, f)`` draws, uniform on ``a_range x f_range`` or on a
        ``grid=(n_a, n_f)`` lattice, onsets every ``period`` seconds.
    ``random_walk``
        reflected Gaussian random walk on ``(a, f)``.
    ``two_class_markov``
        normal/ectopic beats from a two-state Markov chain whose stationary
        ectopic share is ``ectopic_fraction``; ectopic beats arrive after
        ``prematurity * rr`` and are followed by a ``compensation * rr`` pause.
        Normal amplitudes may carry a sinusoidal modulation of depth
        ``am_depth`` at ``am_freq`` Hz.
    ``scripted``
        explicit ``times``, ``amplitudes``, ``frequencies`` and ``labels``.
    """

    kind: str
    params: dict = field(default_factory=dict)
    seed: int | None = 0

    def __post_init__(self):
        if self.kind not in PROCESS_KINDS:
            raise ValueError(f"unknown process kind {self.kind!r}")
        unknown = set(self.params) - set(_DEFAULTS[self.kind]) - (
            {"times", "amplitudes", "frequencies", "labels"} if self.kind == "scripted" else set())
        if unknown:
            raise ValueError(f"unknown parameters for {self.kind}: {sorted(unknown)}")

    def resolved_params(self) -> dict:
        return {**_DEFAULTS[self.kind], **self.params}

    def generate(self, duration: float, margin: float = 0.5) -> CycleSchedule:
        """Emit cycles whose onsets fall in ``[margin, duration - margin]``."""
        p = self.resolved_params()
        rng = np.random.default_rng(self.seed)
        mod = None
        if self.kind == "scripted":
            t = np.asarray(p["times"], float)
            a = np.asarray(p["amplitudes"], float)
            f = np.asarray(p["frequencies"], float)
            lab = np.asarray(p.get("labels", np.zeros(t.size)), dtype=np.int64)
        elif self.kind == "two_class_markov":
            t, a, f, lab, mod = self._markov(p, rng, duration)
        else:
            t = self._onsets(p, rng, duration)
            n = t.size
            if self.kind == "iid":
                if p["grid"] is not None:
                    na, nf = p["grid"]
                    a_vals = np.linspace(*p["a_range"], int(na))
                    f_vals = np.linspace(*p["f_range"], int(nf))
                    a = a_vals[rng.integers(0, len(a_vals), n)]
                    f = f_vals[rng.integers(0, len(f_vals), n)]
                else:
                    a = rng.uniform(*p["a_range"], n)
                    f = rng.uniform(*p["f_range"], n)
            else:
                a = self._walk(p["a0"], p["a_step"], p["a_range"], n, rng)
                f = self._walk(p["f0"], p["f_step"], p["f_range"], n, rng)
            lab = np.zeros(n, dtype=np.int64)
        keep = (t >= margin) & (t <= duration - margin)
        if p.get("n_cycles") is not None:
            keep &= np.cumsum(keep) <= int(p["n_cycles"])
        t, a, f, lab = t[keep], a[keep], f[keep], lab[keep]
        if mod is not None:
            mod = mod[keep]
        if np.any(np.diff(t) <= 0):
            raise ValueError("cycle onsets must be strictly increasing")
        return CycleSchedule(t, a, f, lab, mod)

    @staticmethod
    def _onsets(p, rng, duration):
        period, jitter = p["period"], p["jitter"]
        n_max = int(np.ceil(duration / max(period * (1 - 3 * jitter), 1e-3))) + 2
        steps = period * (1.0 + jitter * rng.standard_normal(n_max))
        steps = np.clip(steps, 0.2 * period, None)
        return p["start"] + np.concatenate([[0.0], np.cumsum(steps[:-1])])

    @staticmethod
    def _walk(x0, step, bounds, n, rng):
        lo, hi = bounds
        out = np.empty(n)
        x = x0
        for i in range(n):
            out[i] = x
            x = x + step * rng.standard_normal()
            if x < lo:
                x = 2 * lo - x
            if x > hi:
                x = 2 * hi - x
        return out

    @staticmethod
    def _markov(p, rng, duration):
        frac, stay = p["ectopic_fraction"], p["ectopic_persistence"]
        if not 0 <= frac < 1:
            raise ValueError("ectopic_fraction must lie in [0, 1)")
        # stationary ectopic share q/(q + 1 - stay) equals frac
        q = frac * (1.0 - stay) / (1.0 - frac) if frac > 0 else 0.0
        if q > 1:
            raise ValueError("ectopic_fraction too large for the given persistence")
        times, amps, freqs, labels, mods = [], [], [], [], []
        t = p["start"]
        state = 0
        prev = 0
        while t < duration:
            resp = 1.0 + p["am_depth"] * np.sin(2 * np.pi * p["am_freq"] * t)
            base = p["a_ectopic"] if state else p["a_normal"]
            a = base * resp * (1.0 + p["a_jitter"] * rng.standard_normal())
            times.append(t)
            amps.append(a)
            freqs.append(p["f_ectopic"] if state else p["f_normal"])
            labels.append(state)
            mods.append(resp)
            prev = state
            u = rng.random()
            state = int(u < (stay if state else q))
            rr = p["rr"] * (1.0 + p["rr_jitter"] * rng.standard_normal())
            if state:
                rr *= p["prematurity"]
            elif prev:
                rr *= p["compensation"]
            t = t + rr
        return (np.array(times), np.array(amps), np.array(freqs),
                np.array(labels, dtype=np.int64), np.array(mods))


def synth_waveshape_model(
    process: DynamicsProcess,
    template_bank: dict | WaveShapeTemplate,
    noise_std: float,
    fs: float,
    duration: float,
    snap_to_grid: bool = True,
    description: dict | None = None,
    tail: float | None = None,
) -> SyntheticDataset:
    """Superpose shifted cycles ``a_j s_{c_j}(f_j (t - t_j))`` plus white Gaussian noise.

    ``template_bank`` maps class labels to templates (a single template serves
    every class). Onsets are moved to the nearest sample when ``snap_to_grid``
    so excised windows line up with the rendered cycles. Overlapping cycles
    are summed in ascending order; the overlapping share of rendered samples
    is stored as ``metadata['overlap_fraction']``. With ``tail`` the recording
    ends ``tail`` seconds after the last onset (or at ``duration``).
    """
    if isinstance(template_bank, WaveShapeTemplate):
        template_bank = {0: template_bank}
    sched = process.generate(duration)
    if sched.times.size == 0:
        raise ValueError("the process emitted no cycles within the duration")
    if tail is not None:
        duration = min(duration, float(sched.times[-1]) + tail)
    n_samples = int(np.floor(duration * fs))
    t_j = sched.times
    if snap_to_grid:
        t_j = np.round(t_j * fs) / fs
    idx = np.round(t_j * fs).astype(np.int64)
    if np.any(np.diff(idx) <= 0):
        raise ValueError("two cycles fall on the same sample; lower fs or widen spacing")

    x = np.zeros(n_samples)
    coverage = np.zeros(n_samples, dtype=np.int64)
    cycles, starts = [], []
    for j in range(t_j.size):
        label = int(sched.labels[j])
        if label not in template_bank:
            raise ValueError(f"no template for class {label}")
        half = 0.5 / sched.frequencies[j]
        k0 = max(int(np.ceil((t_j[j] - half) * fs)), 0)
        k1 = min(int(np.floor((t_j[j] + half) * fs)), n_samples - 1)
        k = np.arange(k0, k1 + 1)
        cyc = manifold_point(template_bank[label], sched.amplitudes[j], sched.frequencies[j],
                             k / fs - t_j[j])
        x[k0:k1 + 1] += cyc
        coverage[k0:k1 + 1] += 1
        cycles.append(cyc)
        starts.append(k0)
    covered = np.count_nonzero(coverage)
    overlap = float(np.count_nonzero(coverage > 1) / covered) if covered else 0.0

    if noise_std > 0:
        rng = np.random.default_rng(None if process.seed is None else process.seed + 1)
        x = x + rng.normal(0.0, noise_std, n_samples)

    meta = {
        "generator": "waveshape_model",
        "process": {"kind": process.kind, "seed": process.seed,
                    "params": _jsonable(process.resolved_params())},
        "seed": process.seed,
        "noise_std": noise_std,
        "duration": duration,
        "templates": {str(k): v.name for k, v in template_bank.items()},
        "overlap_fraction": overlap,
        **(description or {}),
    }
    mods = {}
    if sched.modulator is not None:
        mods["cycle_amplitude_modulator"] = sched.modulator
    return SyntheticDataset(
        signal=TimeSeries(x, fs),
        true_landmarks=LandmarkSequence(idx, fs),
        landmark_times=t_j,
        amplitudes=sched.amplitudes,
        frequencies=sched.frequencies,
        labels=sched.labels,
        modulators=mods,
        cycles=cycles,
        cycle_starts=np.asarray(starts, dtype=np.int64),
        metadata=meta,
    )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj
