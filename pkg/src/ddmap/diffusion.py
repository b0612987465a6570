"""Alpha-normalized diffusion maps.

The pipeline is::

    D2 = pairwise_sq_dists(X)
    h = select_bandwidth(D2, cfg)
    W = affinity(D2, h, cfg.zero_diagonal)
    Wa = alpha_normalize(W, cfg.alpha)
    dec = spectral_decompose(Wa, cfg.d)
    emb = embed(dec, cfg.t, cfg.d)

or simply ``diffusion_map(X, cfg)``. Eigenpairs of the row-stochastic
operator ``A = D_a^{-1} Wa`` are obtained from the symmetric conjugate
``P = D_a^{-1/2} Wa D_a^{-1/2}``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg
from scipy.sparse.linalg import eigsh
from scipy.spatial.distance import pdist, squareform

from .timeseries import DDMapWarning, write_csv

BANDWIDTH_RULES = ("quartile_all_pairs", "knn_percentile", "explicit")
DENSE_LIMIT = 4096


@dataclass
class KernelConfig:
    """Kernel, normalization and embedding parameters.

    ``bandwidth_rule`` is one of ``quartile_all_pairs`` (25th percentile of all
    squared distances), ``knn_percentile`` (``pct``-th percentile of squared
    distances to the ``k``-th nearest neighbour) or ``explicit`` (``h``).
    """

    bandwidth_rule: str = "quartile_all_pairs"
    k: int = 40
    pct: float = 25.0
    h: float | None = None
    alpha: float = 1.0
    zero_diagonal: bool = False
    t: float = 10.0
    d: int = 32
    bandwidth_fallback: bool = True
    negative_modes: str = "drop"

    def __post_init__(self):
        if self.bandwidth_rule not in BANDWIDTH_RULES:
            raise ValueError(f"unknown bandwidth rule {self.bandwidth_rule!r}")
        if not 0 <= self.alpha <= 1:
            raise ValueError("alpha must lie in [0, 1]")
        if not self.t > 0:
            raise ValueError("diffusion time must be positive")
        if int(self.d) != self.d or self.d < 1:
            raise ValueError("embedding dimension must be a positive integer")
        if self.bandwidth_rule == "explicit" and not (self.h is not None and self.h > 0):
            raise ValueError("explicit bandwidth needs h > 0")
        if self.negative_modes not in ("drop", "error"):
            raise ValueError("negative_modes must be 'drop' or 'error'")
        self.d = int(self.d)

    def to_dict(self) -> dict:
        return asdict(self)


def pairwise_sq_dists(X) -> np.ndarray:
    """Squared Euclidean distances between the rows of ``X`` (or a ``CycleMatrix``)."""
    rows = np.asarray(getattr(X, "rows", X), dtype=float)
    if rows.ndim != 2 or rows.shape[0] < 2:
        raise ValueError("need at least two points")
    if not np.all(np.isfinite(rows)):
        raise ValueError("non-finite entries in the point cloud")
    return squareform(pdist(rows, "sqeuclidean"))


def _knn_sq_dists(D2: np.ndarray, k: int) -> np.ndarray:
    n = D2.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < N (k={k}, N={n})")
    off = D2.copy()
    np.fill_diagonal(off, np.inf)
    return np.partition(off, k - 1, axis=1)[:, k - 1]


def select_bandwidth(D2: np.ndarray, cfg: KernelConfig) -> float:
    """Resolve the kernel bandwidth ``h`` from squared distances.

    Percentiles interpolate linearly between order statistics. The
    all-pairs quartile includes the zero diagonal; if it resolves to 0 and
    ``cfg.bandwidth_fallback`` is set, zero entries are excluded and a warning
    is emitted.
    """
    if cfg.bandwidth_rule == "explicit":
        return float(cfg.h)
    if cfg.bandwidth_rule == "quartile_all_pairs":
        vals = np.asarray(D2, dtype=float).ravel()
        h = float(np.percentile(vals, 25.0))
        if h == 0 and cfg.bandwidth_fallback:
            nz = vals[vals > 0]
            if nz.size:
                warnings.warn("quartile of all squared distances is 0; recomputed without zero "
                              "entries", DDMapWarning, stacklevel=2)
                h = float(np.percentile(nz, 25.0))
    else:
        h = float(np.percentile(_knn_sq_dists(np.asarray(D2, float), int(cfg.k)), cfg.pct))
    if not h > 0:
        raise ValueError("degenerate bandwidth (h = 0); too many duplicate points")
    return h


def affinity(D2: np.ndarray, h: float, zero_diagonal: bool = False) -> np.ndarray:
    """Gaussian affinity ``exp(-D2 / h)``."""
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    W = np.exp(-np.asarray(D2, dtype=float) / h)
    if zero_diagonal:
        np.fill_diagonal(W, 0.0)
    return W


def _degrees(W: np.ndarray) -> np.ndarray:
    deg = W.sum(axis=1)
    if np.any(deg <= 0):
        raise ValueError(f"isolated point (zero row sum) at index {int(np.flatnonzero(deg <= 0)[0])}")
    return deg


def alpha_normalize(W: np.ndarray, alpha: float) -> np.ndarray:
    """``D^{-alpha} W D^{-alpha}`` with ``D`` the row sums of ``W``."""
    W = np.asarray(W, dtype=float)
    deg = _degrees(W)
    if alpha == 0:
        return W.copy()
    q = deg ** alpha
    return W / np.outer(q, q)


def diffusion_operator(Wa: np.ndarray) -> np.ndarray:
    """Row-stochastic Markov matrix ``D_a^{-1} Wa``."""
    Wa = np.asarray(Wa, dtype=float)
    A = Wa / _degrees(Wa)[:, None]
    # one more division pins every row sum to 1 up to a few ulps
    return A / A.sum(axis=1, keepdims=True)


def canonical_sign(v: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    """Flip columns so the entry of largest magnitude is positive (first one on ties)."""
    v = np.array(v, dtype=float, copy=True)
    cols = v if v.ndim == 2 else v[:, None]
    for j in range(cols.shape[1]):
        mag = np.abs(cols[:, j])
        top = mag.max()
        if top == 0:
            continue
        i = int(np.flatnonzero(mag >= top * (1 - rtol))[0])
        if cols[i, j] < 0:
            cols[:, j] = -cols[:, j]
    return v


@dataclass
class SpectralDecomposition:
    """Leading eigenpairs of the diffusion operator, in descending order."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    degrees: np.ndarray
    residuals: np.ndarray
    connected: bool = True
    notes: list = field(default_factory=list)

    @property
    def n_modes(self) -> int:
        return self.eigenvalues.size


def spectral_decompose(Wa: np.ndarray, d: int, tol: float = 1e-8) -> SpectralDecomposition:
    """Top ``d + 1`` eigenpairs of ``A = D_a^{-1} Wa`` via the symmetric conjugate.

    The trivial pair ``(1, constant)`` is known in closed form; it is deflated
    from ``P`` (shifted to -2, below the spectrum) so that a nearly
    disconnected graph cannot mix it with the next mode. Eigenvectors of ``A``
    are ``D_a^{-1/2}`` times those of ``P``, scaled to unit Euclidean norm
    and sign-fixed by ``canonical_sign``.
    """
    Wa = np.asarray(Wa, dtype=float)
    n = Wa.shape[0]
    if Wa.shape != (n, n):
        raise ValueError("affinity must be square")
    if not np.allclose(Wa, Wa.T, rtol=1e-12, atol=1e-14):
        raise ValueError("affinity must be symmetric")
    if not 1 <= d + 1 <= n:
        raise ValueError(f"need d + 1 <= N (d={d}, N={n})")
    deg = _degrees(Wa)
    s = np.sqrt(deg)
    P = Wa / np.outer(s, s)
    P = 0.5 * (P + P.T)
    v1 = s / np.linalg.norm(s)
    # the closed-form top pair must be an eigenpair of P
    r1 = float(np.linalg.norm(P @ v1 - v1))
    if r1 > tol:
        raise RuntimeError(f"trivial eigenpair check failed (residual {r1:.3g})")
    notes = []
    if d >= 1:
        Pd = P - 3.0 * np.outer(v1, v1)
        try:
            if n <= DENSE_LIMIT:
                w, V = linalg.eigh(Pd, subset_by_index=[n - d, n - 1])
            else:
                w, V = eigsh(Pd, k=d, which="LA", tol=1e-12)
        except (linalg.LinAlgError, ArithmeticError) as exc:  # pragma: no cover - solver failure
            raise RuntimeError(f"eigensolver did not converge: {exc}") from exc
        order = np.argsort(-w, kind="stable")
        w, V = w[order], V[:, order]
        lam = np.concatenate([[1.0], w])
        vecs = np.column_stack([v1, V])
    else:
        lam = np.array([1.0])
        vecs = v1[:, None]
    phi = vecs / s[:, None]
    phi = phi / np.linalg.norm(phi, axis=0, keepdims=True)
    phi = canonical_sign(phi)

    A = Wa / deg[:, None]
    res = np.linalg.norm(A @ phi - phi * lam[None, :], axis=0)
    if np.any(res > tol):
        k = int(np.argmax(res))
        raise RuntimeError(f"eigensolver residual too large: mode {k + 1} has "
                           f"||A phi - lambda phi|| = {res[k]:.3g}")
    spread = np.ptp(phi[:, 0]) / np.abs(phi[:, 0]).mean()
    connected = True
    if spread > 1e-6:
        notes.append(f"first eigenvector not constant (relative spread {spread:.3g})")
        connected = False
    if lam.size > 1 and lam[1] > 1 - 1e-8:
        notes.append(f"lambda_2 = {float(lam[1]):.17g} is within 1e-8 of 1: nearly disconnected components")
        connected = False
    return SpectralDecomposition(lam, phi, deg, res, connected, notes)


@dataclass
class DiffusionEmbedding:
    """Diffusion coordinates ``lambda_k^t phi_k`` for ``k = 2 .. d + 1``."""

    coords: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    h: float
    alpha: float
    t: float
    component_count: int
    all_eigenvalues: np.ndarray | None = None

    @property
    def d(self) -> int:
        return self.coords.shape[1]

    @property
    def spectral_gap(self) -> float:
        return float(self.eigenvalues[0] - self.eigenvalues[1]) if self.eigenvalues.size > 1 else float("nan")

    def report(self, d: int | None = None) -> dict:
        return {
            "lambda": [float(v) for v in self.eigenvalues],
            "h": float(self.h),
            "alpha": float(self.alpha),
            "t": float(self.t),
            "d": int(self.d if d is None else d),
        }

    def export(self, csv_path, json_path, landmark_samples=None, times=None) -> None:
        n = self.coords.shape[0]
        ls = np.arange(n, dtype=np.int64) if landmark_samples is None else np.asarray(landmark_samples, np.int64)
        ts = np.asarray(ls, float) if times is None else np.asarray(times, float)
        header = ["landmark_sample", "time_s"] + [f"coord_{k + 1}" for k in range(self.d)]
        write_csv(csv_path, header, [ls, ts] + list(self.coords.T))
        Path(json_path).write_text(json.dumps(self.report(), indent=2) + "\n", encoding="utf-8")


def _is_integer(t: float) -> bool:
    return float(t).is_integer()


def embed(dec: SpectralDecomposition, t: float, d: int, negative_modes: str = "drop",
          h: float = float("nan"), alpha: float = float("nan")) -> DiffusionEmbedding:
    """Truncated diffusion map ``x_j -> (lambda_k^t phi_k(j))_{k=2}^{d+1}``.

    Negative eigenvalues (possible with a zeroed diagonal) are raised to an
    integer ``t`` directly; for a fractional ``t`` those modes are dropped,
    or rejected when ``negative_modes='error'``.
    """
    if not t > 0:
        raise ValueError("diffusion time must be positive")
    if d + 1 > dec.n_modes:
        raise ValueError(f"decomposition holds {dec.n_modes - 1} nontrivial modes, asked for {d}")
    lam = dec.eigenvalues[1:d + 1]
    phi = dec.eigenvectors[:, 1:d + 1]
    if np.any(lam < 0) and not _is_integer(t):
        if negative_modes == "error":
            raise ValueError("fractional power of negative eigenvalue; use an integer diffusion time")
        keep = lam >= 0
        warnings.warn(f"dropping {int(np.count_nonzero(~keep))} mode(s) with negative eigenvalue "
                      f"for fractional t={t}", DDMapWarning, stacklevel=2)
        lam, phi = lam[keep], phi[:, keep]
    powered = np.power(lam, int(t)) if _is_integer(t) else np.power(lam, t)
    coords = phi * powered[None, :]
    components = int(np.count_nonzero(dec.eigenvalues > 1 - 1e-8))
    return DiffusionEmbedding(coords, lam.copy(), phi.copy(), float(h), float(alpha), float(t),
                              components, dec.eigenvalues.copy())


def diffusion_distance(emb: DiffusionEmbedding, i: int, j: int) -> float:
    """Euclidean distance between embedded points ``i`` and ``j``."""
    return float(np.linalg.norm(emb.coords[i] - emb.coords[j]))


def diffusion_map(X, cfg: KernelConfig) -> DiffusionEmbedding:
    """Run the full chain from a point cloud to its diffusion embedding."""
    D2 = pairwise_sq_dists(X)
    n = D2.shape[0]
    if cfg.d > n - 1:
        raise ValueError(f"embedding dimension d={cfg.d} needs more than {cfg.d} points (N={n})")
    h = select_bandwidth(D2, cfg)
    W = affinity(D2, h, cfg.zero_diagonal)
    Wa = alpha_normalize(W, cfg.alpha)
    dec = spectral_decompose(Wa, cfg.d)
    for note in dec.notes:
        warnings.warn(note, DDMapWarning, stacklevel=2)
    return embed(dec, cfg.t, cfg.d, cfg.negative_modes, h=h, alpha=cfg.alpha)
