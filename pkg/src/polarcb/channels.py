"""Near-field channel generation and effective channels after analog beamforming."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .array_model import ArrayConfig, PolarCoord, steering_matrix_exact


@dataclass(frozen=True)
class PathParam:
    coord: PolarCoord
    gain: complex


@dataclass(frozen=True)
class ChannelRealization:
    "Channel vector sqrt(M) * sum_l gain_l * a(coord_l) together with its paths."

    vector: np.ndarray
    paths: tuple[PathParam, ...]

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(self.paths))


def _assemble(cfg: ArrayConfig, paths) -> ChannelRealization:
    thetas = np.array([p.coord.theta for p in paths])
    ranges = np.array([p.coord.r for p in paths])
    gains = np.array([p.gain for p in paths], dtype=np.complex128)
    steer = steering_matrix_exact(cfg, thetas, ranges)
    vec = np.sqrt(cfg.num_antennas) * (gains[:, None] * steer).sum(axis=0)
    return ChannelRealization(vec, tuple(paths))


def los_channel(cfg: ArrayConfig, coord: PolarCoord, beta: complex = 1.0) -> ChannelRealization:
    "Single-path channel sqrt(M) * beta * a(theta, r)."
    return _assemble(cfg, [PathParam(coord, complex(beta))])


def multipath_channel(cfg: ArrayConfig, user: PolarCoord, scatterers, kappa_db: float,
                      seed) -> ChannelRealization:
    """Rician-style channel: deterministic line-of-sight gain plus Gaussian scatter paths.

    The direct path carries sqrt(kappa/(1+kappa)) with kappa linear; each of
    the L-1 scatter gains is CN(0, (1/(1+kappa))/(L-1)) so the total mean
    power is 1 for any kappa and L.
    """
    scatterers = list(scatterers)
    kappa = 10.0 ** (kappa_db / 10.0)
    los_gain = np.sqrt(kappa / (1.0 + kappa))
    paths = [PathParam(user, complex(los_gain))]
    if scatterers:
        rng = np.random.default_rng(seed)
        var = (1.0 / (1.0 + kappa)) / len(scatterers)
        g = rng.standard_normal((len(scatterers), 2)) @ np.array([1.0, 1.0j]) * np.sqrt(var / 2)
        paths += [PathParam(c, complex(gi)) for c, gi in zip(scatterers, g)]
    return _assemble(cfg, paths)


def multipath_channel_equal(cfg: ArrayConfig, paths, seed) -> ChannelRealization:
    "All path gains CN(0, 1/L); used for the non-dominant-path scenario."
    coords = list(paths)
    if not coords:
        raise ValueError("need at least one path")
    rng = np.random.default_rng(seed)
    L = len(coords)
    g = rng.standard_normal((L, 2)) @ np.array([1.0, 1.0j]) * np.sqrt(1.0 / (2 * L))
    return _assemble(cfg, [PathParam(c, complex(gi)) for c, gi in zip(coords, g)])


def effective_channel(channels, f_rf: np.ndarray) -> np.ndarray:
    "Rows h_k^H F_RF of the K x K effective channel matrix."
    vecs = np.array([ch.vector if isinstance(ch, ChannelRealization) else ch
                     for ch in channels])
    if f_rf.shape[1] != len(vecs):
        raise ValueError("F_RF must have one column per user")
    if f_rf.shape[0] != vecs.shape[1]:
        raise ValueError("F_RF row count must match antenna count")
    return vecs.conj() @ f_rf
