"""Named synthetic datasets used by the command line and the test-suite."""

from __future__ import annotations

import numpy as np

from .synthesis import (
    DynamicsProcess,
    PhenomenologicalSpec,
    SyntheticDataset,
    make_template,
    synth_phenomenological,
    synth_waveshape_model,
)


def _ecg_train(seed: int, ectopic_fraction: float, am_depth: float, n_cycles: int = 1000,
               noise_std: float = 0.02, fs: float = 200.0, name: str = "") -> SyntheticDataset:
    proc = DynamicsProcess(
        "two_class_markov",
        dict(ectopic_fraction=ectopic_fraction, am_depth=am_depth, am_freq=0.25, rr=0.9,
             rr_jitter=0.03, f_normal=1.25, f_ectopic=1.25, n_cycles=n_cycles),
        seed=seed,
    )
    bank = {0: make_template("ecg_like", 512), 1: make_template("pvc_like", 512)}
    duration = 1.0 + 1.2 * 0.9 * n_cycles * 1.1
    return synth_waveshape_model(proc, bank, noise_std, fs, duration, tail=1.0,
                                 description={"scenario": name})


def pvc10(seed: int = 7, n_cycles: int = 1000) -> SyntheticDataset:
    """Two morphology classes: ECG-like beats with 10% premature ventricular beats."""
    return _ecg_train(seed, 0.1, 0.0, n_cycles, name="pvc10")


def pvc10_am(seed: int = 7, n_cycles: int = 1000) -> SyntheticDataset:
    """As ``pvc10`` with a 0.25 Hz amplitude modulation of depth 0.2."""
    return _ecg_train(seed, 0.1, 0.2, n_cycles, name="pvc10_am")


def ecg_am(seed: int = 7, n_cycles: int = 600) -> SyntheticDataset:
    """Normal beats only, 0.25 Hz amplitude modulation."""
    return _ecg_train(seed, 0.0, 0.2, n_cycles, name="ecg_am")


def ecg_flat(seed: int = 7, n_cycles: int = 600) -> SyntheticDataset:
    """Normal beats only, no modulation."""
    return _ecg_train(seed, 0.0, 0.0, n_cycles, name="ecg_flat")


def abp(seed: int = 7, n_cycles: int = 240, fs: float = 125.0) -> SyntheticDataset:
    """Arterial-pressure-like pulses whose amplitude and dilation drift slowly."""
    proc = DynamicsProcess(
        "random_walk",
        dict(a0=1.0, f0=1.3, a_step=0.01, f_step=0.005, a_range=(0.7, 1.3), f_range=(1.15, 1.45),
             period=0.8, jitter=0.02, n_cycles=n_cycles),
        seed=seed,
    )
    duration = 1.0 + 0.8 * n_cycles * 1.2
    return synth_waveshape_model(proc, make_template("abp_like", 512), 0.01, fs, duration,
                                 tail=1.0, description={"scenario": "abp"})


def manifold(seed: int = 7, grid: int = 30) -> SyntheticDataset:
    """Cycles ``a s(f t)`` on a regular ``(a, f)`` lattice, spaced one second apart."""
    a = np.linspace(0.75, 1.25, grid)
    f = np.linspace(2.0, 9.0, grid)
    aa, ff = np.meshgrid(a, f, indexing="ij")
    n = aa.size
    proc = DynamicsProcess(
        "scripted",
        dict(times=1.0 + np.arange(n), amplitudes=aa.ravel(), frequencies=ff.ravel(),
             labels=np.zeros(n, dtype=np.int64)),
        seed=seed,
    )
    return synth_waveshape_model(proc, make_template("db4_like", 512), 0.0, 200.0, n + 2.0,
                                 description={"scenario": "manifold"})


def phenomenological(seed: int = 7, epsilon: float = 0.02, duration: float = 120.0) -> SyntheticDataset:
    """Slowly varying amplitude and instantaneous frequency around a Gaussian bump."""
    e = epsilon
    spec = PhenomenologicalSpec(
        amplitude=lambda t: 1 + (e / 2) * np.sin(t),
        phase=lambda t: t - e * np.cos(t / 2) + e,
        inst_freq=lambda t: 1 + (e / 2) * np.sin(t / 2),
        template=make_template("gauss_bump", 1024),
        fs=200.0, duration=duration, epsilon=e, seed=seed,
        description={"scenario": "phenomenological"},
    )
    return synth_phenomenological(spec)


SCENARIOS = {
    "pvc10": pvc10,
    "pvc10_am": pvc10_am,
    "ecg_am": ecg_am,
    "ecg_flat": ecg_flat,
    "abp": abp,
    "manifold": manifold,
    "phenomenological": phenomenological,
}


def make_scenario(name: str, seed: int = 7) -> SyntheticDataset:
    if name not in SCENARIOS:
        raise KeyError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    return SCENARIOS[name](seed=seed)
