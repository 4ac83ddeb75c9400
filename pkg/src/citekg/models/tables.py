"""Dense learnable parameter tables and their initialization.

Complex-valued tables store d complex coordinates as 2d reals with
interleaved re/im layout, so a float64 row views directly as complex128.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from ..utils import as_rng


def init_bound(d: int, gamma: float = 0.0) -> float:
    """Uniform init half-width: (2 + gamma) / d."""
    if d <= 0:
        raise ConfigError("embedding dimension must be positive")
    return (2.0 + gamma) / d


def init_entity_random(d: int, gamma: float, rng) -> np.ndarray:
    """One uniform row in (-mu, mu) with mu = (2 + gamma) / d."""
    return init_uniform((d,), d, gamma, rng)


def init_uniform(shape, d: int, gamma: float, rng) -> np.ndarray:
    mu = init_bound(d, gamma)
    return as_rng(rng).uniform(-mu, mu, size=shape)


def init_phases(shape, rng) -> np.ndarray:
    """Rotation angles in [0, 2pi); unit modulus holds by construction."""
    return as_rng(rng).uniform(0.0, 2.0 * np.pi, size=shape)


def as_complex(rows: np.ndarray) -> np.ndarray:
    """View interleaved-re/im float64 rows as complex128."""
    rows = np.ascontiguousarray(rows, dtype=np.float64)
    if rows.shape[-1] % 2:
        raise ConfigError("interleaved complex rows need an even width")
    return rows.view(np.complex128)


def as_interleaved(rows: np.ndarray) -> np.ndarray:
    """Inverse of :func:`as_complex`."""
    return np.ascontiguousarray(rows, dtype=np.complex128).view(np.float64)


def split_static_dynamic(d: int, psi: float) -> tuple[int, int]:
    """Static/dynamic widths for a time-conditioned table.

    The dynamic fraction is ``psi``; static width is ceil((1-psi)*d).
    """
    if not 0.0 <= psi < 1.0:
        raise ConfigError(f"psi must be in [0, 1), got {psi}")
    d_static = int(np.ceil((1.0 - psi) * d))
    return d_static, d - d_static
