"""Angle/range sampling sets and polar-domain codebooks for Phase-1 feedback.

Closed-form constructions cover the uniform-user case: equally spaced angle
samples and geometrically spaced range samples (constant adjacent ratio,
midpoints of log-uniform cells).  The prior-art hyperbolic set (uniform in
1/r), a plain uniform set, a hybrid far/near set and a far-field DFT grid
serve as benchmarks.  Non-uniform user data is handled by one-dimensional
Lloyd iterations in the matching metric.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .array_model import ArrayConfig, PolarRegion, steering_matrix_exact


def uniform_angle_samples(region: PolarRegion, p: int) -> np.ndarray:
    "2^p equally spaced spatial angles theta_min + i * span/(2^p + 1), i = 1..2^p."
    if p < 0:
        raise ValueError("p must be >= 0")
    n = 2**p
    step = region.angle_span / (n + 1)
    return region.theta_min + step * np.arange(1, n + 1)


def geometric_range_samples(region: PolarRegion, q: int) -> np.ndarray:
    """2^q ranges with constant adjacent ratio (r_max/r_min)^(1/2^q).

    Sample i is the arithmetic midpoint of the log-uniform cell
    [r_min * ratio^(i-1), r_min * ratio^i].
    """
    if q < 0:
        raise ValueError("q must be >= 0")
    n = 2**q
    ratio = (region.r_max / region.r_min) ** (1.0 / n)
    return (region.r_min / 2.0) * (1.0 / ratio + 1.0) * ratio ** np.arange(1, n + 1)


def hyperbolic_range_samples(region: PolarRegion, q: int) -> np.ndarray:
    "2^q ranges equally spaced in 1/r over [r_min, r_max], sorted ascending."
    if q < 0:
        raise ValueError("q must be >= 0")
    n = 2**q
    ratio2 = region.r_max / region.r_min
    i = np.arange(1, n + 1)
    return np.sort(n * region.r_max / (i * (ratio2 - 1.0) + n))


def uniform_range_samples(region: PolarRegion, q: int) -> np.ndarray:
    "Midpoints of 2^q equal-width cells over [r_min, r_max]."
    if q < 0:
        raise ValueError("q must be >= 0")
    n = 2**q
    width = region.range_span / n
    return region.r_min + width * (np.arange(n) + 0.5)


def hybrid_field_range_samples(region: PolarRegion, q: int) -> np.ndarray:
    """Hyperbolic set with the largest sample replaced by +inf.

    The infinite entry stands for the far-field DFT codeword; the remaining
    2^q - 1 entries are the hyperbolic samples i = 2..2^q.
    """
    if q < 1:
        raise ValueError("hybrid-field sampling needs q >= 1")
    hyp = hyperbolic_range_samples(region, q)
    return np.concatenate([hyp[:-1], [np.inf]])


class LloydConvergenceError(RuntimeError):
    "Raised when the alternating update fails to settle; carries the partial result."

    def __init__(self, message, samples):
        super().__init__(message)
        self.samples = samples


_OBJECTIVE_REL_TOL = 1e-8
"Stop once an iteration improves the distortion by less than this, relatively."


def _lloyd_1d(values: np.ndarray, n_codes: int, tolerance: float, max_iters: int,
              init: np.ndarray, return_history: bool):
    """1-D Lloyd loop on already-transformed values.

    Codeword update is the per-cell median, the exact minimizer of the mean
    absolute error; empty cells are reseeded by splitting the most populated
    cell at its median.  Terminates when the per-codeword movement drops
    below `tolerance` or the distortion stops improving (with finite data
    the movement criterion alone lets the codes random-walk along the flat
    valley of near-optimal configurations).
    """
    values = np.sort(np.asarray(values, dtype=np.float64))
    codes = np.sort(np.asarray(init, dtype=np.float64))
    history = []
    prev_obj = np.inf
    for _ in range(max_iters):
        edges = (codes[:-1] + codes[1:]) / 2.0
        cells = np.searchsorted(edges, values)
        obj = float(np.abs(values - codes[cells]).mean())
        history.append(obj)
        counts = np.bincount(cells, minlength=n_codes)
        offsets = np.concatenate([[0], np.cumsum(counts)])
        new_codes = codes.copy()
        chunks = {i: values[offsets[i]:offsets[i + 1]] for i in range(n_codes)}
        for i in range(n_codes):
            if counts[i]:
                new_codes[i] = np.median(chunks[i])
        for i in np.nonzero(counts == 0)[0]:
            big = int(np.argmax(counts))
            chunk = chunks[big]
            half = len(chunk) // 2
            if half == 0:
                new_codes[i] = new_codes[big]
                continue
            new_codes[i] = np.median(chunk[:half])
            new_codes[big] = np.median(chunk[half:])
            chunks[i], chunks[big] = chunk[:half], chunk[half:]
            counts[i], counts[big] = half, len(chunk) - half
        new_codes = np.sort(new_codes)
        shift = float(np.max(np.abs(new_codes - codes)))
        codes = new_codes
        converged = shift < tolerance or prev_obj - obj < _OBJECTIVE_REL_TOL * max(obj, 1e-300)
        prev_obj = obj
        if converged:
            edges = (codes[:-1] + codes[1:]) / 2.0
            cells = np.searchsorted(edges, values)
            history.append(float(np.abs(values - codes[cells]).mean()))
            return codes, (history if return_history else [])
    raise LloydConvergenceError(f"no convergence after {max_iters} iterations", codes)


def lloyd_range_samples(data, q: int, tolerance: float, max_iters: int = 500,
                        init: str = "geometric", seed=None, return_history: bool = False):
    """Range samples adapted to empirical range data, quantized in 1/r.

    Alternates nearest-neighbor partitioning under |1/r - 1/c| with the
    closed-form codeword update 1/c = median(1/r) per cell.  With uniformly
    distributed data this settles on the geometric construction.
    """
    data = np.asarray(data, dtype=np.float64)
    n = 2**q
    if len(data) < n:
        raise ValueError("need at least 2^q data points")
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    r_lo, r_hi = float(data.min()), float(data.max())
    region = PolarRegion(-1.0, 1.0, r_lo, max(r_hi, r_lo * (1 + 1e-12)))
    if init == "geometric":
        start = geometric_range_samples(region, q)
    elif init == "random":
        rng = np.random.default_rng(seed)
        start = rng.uniform(region.r_min, region.r_max, n)
    else:
        raise ValueError("init must be 'geometric' or 'random'")
    # iterate in the inverse domain; movement tolerance maps via |d(1/r)| ~ |dr| / r^2
    inv_tol = tolerance / region.r_max**2
    inv_codes, inv_hist = _lloyd_1d(1.0 / data, n, inv_tol, max_iters,
                                    np.sort(1.0 / start), return_history)
    samples = np.sort(1.0 / inv_codes)
    return (samples, inv_hist) if return_history else samples


def lloyd_angle_samples(data, p: int, tolerance: float, max_iters: int = 500,
                        init: str = "uniform", seed=None, return_history: bool = False):
    "Angle samples adapted to empirical angle data, quantized in plain |theta - c|."
    data = np.asarray(data, dtype=np.float64)
    n = 2**p
    if len(data) < n:
        raise ValueError("need at least 2^p data points")
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    lo, hi = float(data.min()), float(data.max())
    if init == "uniform":
        span = max(hi - lo, 1e-12)
        start = lo + span * np.arange(1, n + 1) / (n + 1)
    elif init == "random":
        rng = np.random.default_rng(seed)
        start = rng.uniform(lo, hi, n)
    else:
        raise ValueError("init must be 'uniform' or 'random'")
    codes, hist = _lloyd_1d(data, n, tolerance, max_iters, np.sort(start), return_history)
    return (codes, hist) if return_history else codes


@dataclass(frozen=True, eq=False)
class PolarCodebook:
    """Cartesian product of angle and range samples, one steering codeword each.

    Codeword (i, j) pairs angle sample i with range sample j and lives at
    flat index i * len(range_samples) + j.  Infinite range entries hold
    far-field DFT codewords.
    """

    cfg: ArrayConfig
    angle_samples: np.ndarray
    range_samples: np.ndarray
    _cache: list = field(default_factory=lambda: [None], repr=False)

    def __post_init__(self):
        object.__setattr__(self, "angle_samples", np.asarray(self.angle_samples, dtype=np.float64))
        object.__setattr__(self, "range_samples", np.asarray(self.range_samples, dtype=np.float64))

    def __len__(self) -> int:
        return len(self.angle_samples) * len(self.range_samples)

    def flat_index(self, i: int, j: int) -> int:
        return i * len(self.range_samples) + j

    def location(self, flat: int) -> tuple[float, float]:
        "The (theta, r) grid point behind a flat codeword index."
        nq = len(self.range_samples)
        return float(self.angle_samples[flat // nq]), float(self.range_samples[flat % nq])

    @property
    def codewords(self) -> np.ndarray:
        "Materialized (len, M) codeword array, built on first access."
        if self._cache[0] is None:
            nq = len(self.range_samples)
            th = np.repeat(self.angle_samples, nq)
            rr = np.tile(self.range_samples, len(self.angle_samples))
            self._cache[0] = steering_matrix_exact(self.cfg, th, rr)
        return self._cache[0]

    def codeword(self, i: int, j: int) -> np.ndarray:
        return steering_matrix_exact(self.cfg, self.angle_samples[i],
                                     self.range_samples[j]).reshape(-1)

    def save_csv(self, path: str | Path) -> None:
        "Write `index,theta,range_m` rows; infinite ranges serialize as `inf`."
        nq = len(self.range_samples)
        with open(path, "w", newline="") as fh:
            fh.write("index,theta,range_m\n")
            for flat in range(len(self)):
                th = float(self.angle_samples[flat // nq])
                rr = float(self.range_samples[flat % nq])
                fh.write(f"{flat},{th!r},{rr!r}\n")

    def save_binary(self, path: str | Path) -> None:
        "Header (M, angle count, range count as little-endian u32) then interleaved re/im f64."
        cw = self.codewords
        with open(path, "wb") as fh:
            fh.write(struct.pack("<III", self.cfg.num_antennas,
                                 len(self.angle_samples), len(self.range_samples)))
            inter = np.empty((cw.shape[0], cw.shape[1] * 2))
            inter[:, 0::2] = cw.real
            inter[:, 1::2] = cw.imag
            fh.write(inter.astype("<f8").tobytes())


def assemble_codebook(cfg: ArrayConfig, angle_set, range_set) -> PolarCodebook:
    "Materialize the codebook for the given sampling sets."
    cb = PolarCodebook(cfg, np.asarray(angle_set), np.asarray(range_set))
    cb.codewords
    return cb


def dft_angle_codebook(cfg: ArrayConfig, region: PolarRegion, total_bits: int) -> PolarCodebook:
    "2^total_bits uniform angle samples, all at infinite range (far-field codewords)."
    if total_bits < 0:
        raise ValueError("total_bits must be >= 0")
    angles = uniform_angle_samples(region, total_bits)
    return PolarCodebook(cfg, angles, np.array([np.inf]))


def load_codebook_csv(cfg: ArrayConfig, path: str | Path) -> PolarCodebook:
    "Rebuild a codebook from its CSV location table."
    thetas, ranges = [], []
    with open(path, newline="") as fh:
        header = fh.readline().strip()
        if header != "index,theta,range_m":
            raise ValueError(f"{path}: expected header 'index,theta,range_m'")
        for line in fh:
            _, th, rr = line.strip().split(",")
            thetas.append(float(th))
            ranges.append(float(rr))
    angle_samples = np.unique(thetas)
    range_samples = np.array(sorted(set(ranges), key=lambda x: (np.isinf(x), x)))
    if len(angle_samples) * len(range_samples) != len(thetas):
        raise ValueError(f"{path}: rows do not form an angle x range grid")
    return PolarCodebook(cfg, angle_samples, range_samples)


def load_codebook_binary(path: str | Path):
    "Read back (M, codeword array) from the binary format."
    with open(path, "rb") as fh:
        m, n_ang, n_rng = struct.unpack("<III", fh.read(12))
        raw = np.frombuffer(fh.read(), dtype="<f8").reshape(n_ang * n_rng, 2 * m)
    return m, raw[:, 0::2] + 1j * raw[:, 1::2]


SCHEMES = ("geometric", "hyperbolic", "uniform", "dft", "hybrid", "extended")


def scheme_range_samples(scheme: str, region: PolarRegion, q: int) -> np.ndarray:
    builders = {
        "geometric": geometric_range_samples,
        "hyperbolic": hyperbolic_range_samples,
        "uniform": uniform_range_samples,
        "hybrid": hybrid_field_range_samples,
    }
    if scheme not in builders:
        raise ValueError(f"unknown range sampling scheme '{scheme}'")
    return builders[scheme](region, q)


def scheme_codebook(cfg: ArrayConfig, region: PolarRegion, scheme: str, p: int, q: int,
                    lloyd_data=None, lloyd_tolerance: float = 1e-6) -> PolarCodebook:
    """Benchmark codebook by name.

    `dft` spends all p + q bits on far-field angles; `extended` runs the
    Lloyd refinement on `lloyd_data` ranges and keeps uniform angles.
    """
    if scheme == "dft":
        return dft_angle_codebook(cfg, region, p + q)
    angles = uniform_angle_samples(region, p)
    if scheme == "extended":
        if lloyd_data is None:
            raise ValueError("extended scheme needs range training data")
        ranges = lloyd_range_samples(lloyd_data, q, lloyd_tolerance)
    else:
        ranges = scheme_range_samples(scheme, region, q)
    return PolarCodebook(cfg, angles, ranges)
