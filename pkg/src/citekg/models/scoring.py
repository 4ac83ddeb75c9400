"""Quad scoring functions and their analytic gradients.

Four scorers over embedding rows, all broadcasting over leading axes:

* complex bilinear:  Re(sum_i s_i * r_i * conj(o_i))  with s, r, o complex
* rotation distance: -sum_i |s_i * e^{i theta_i} - o_i|^2  (squared norm)
* translation distance on time-conditioned vectors: -||D(s,t) + r - D(o,t)||
* trilinear product on time-conditioned vectors: <D(s,t), r, D(o,t)>

Time-conditioned (diachronic) vectors concatenate a static block with an
amplitude * sin(frequency * t + phase) block.

Gradients with respect to complex quantities use the convention
``g = df/d(re) + i * df/d(im)``, which makes the chain rule a plain
elementwise multiply-accumulate on the interleaved storage.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError


def _check_same_width(*arrays):
    widths = {a.shape[-1] for a in arrays}
    if len(widths) != 1:
        raise ConfigError(f"dimension mismatch across operands: {sorted(widths)}")


# -- complex bilinear ------------------------------------------------

def score_complex(s, r, o) -> np.ndarray:
    s, r, o = (np.asarray(x, dtype=np.complex128) for x in (s, r, o))
    _check_same_width(s, r, o)
    return np.real(np.sum(s * r * np.conj(o), axis=-1))


def grad_complex(s, r, o):
    """Gradients of the complex bilinear score: (g_s, g_r, g_o)."""
    s, r, o = (np.asarray(x, dtype=np.complex128) for x in (s, r, o))
    return np.conj(r) * o, np.conj(s) * o, s * r


# -- rotation --------------------------------------------------------

def score_rotate(s, theta, o) -> np.ndarray:
    s = np.asarray(s, dtype=np.complex128)
    o = np.asarray(o, dtype=np.complex128)
    theta = np.asarray(theta, dtype=np.float64)
    _check_same_width(s, theta, o)
    u = s * np.exp(1j * theta) - o
    return -np.sum(np.real(u) ** 2 + np.imag(u) ** 2, axis=-1)


def grad_rotate(s, theta, o):
    """Gradients of the rotation score: (g_s, g_theta, g_o)."""
    s = np.asarray(s, dtype=np.complex128)
    o = np.asarray(o, dtype=np.complex128)
    theta = np.asarray(theta, dtype=np.float64)
    rot = np.exp(1j * theta)
    u = s * rot - o
    g_s = -2.0 * u * np.conj(rot)
    g_theta = 2.0 * np.imag(np.conj(u) * s * rot)
    g_o = 2.0 * u
    return g_s, g_theta, g_o


# -- diachronic embedding --------------------------------------------

def diachronic_embed(static, amplitude, frequency, phase, t) -> np.ndarray:
    """Concatenate the static block with amplitude*sin(frequency*t+phase).

    ``t`` broadcasts against leading axes; the output width is
    ``static.shape[-1] + amplitude.shape[-1]``.
    """
    static, amplitude, frequency, phase = (
        np.asarray(x, dtype=np.float64)
        for x in (static, amplitude, frequency, phase))
    t = np.asarray(t, dtype=np.float64)[..., None]
    dyn = amplitude * np.sin(frequency * t + phase)
    shape = np.broadcast_shapes(static.shape[:-1], dyn.shape[:-1])
    static = np.broadcast_to(static, shape + static.shape[-1:])
    dyn = np.broadcast_to(dyn, shape + dyn.shape[-1:])
    return np.concatenate([static, dyn], axis=-1)


def diachronic_backward(g, amplitude, frequency, phase, t, d_static):
    """Split a gradient over the embedded vector into parameter grads.

    Returns ``(g_static, g_amplitude, g_frequency, g_phase)``.
    """
    g = np.asarray(g, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)[..., None]
    g_static, g_dyn = g[..., :d_static], g[..., d_static:]
    arg = frequency * t + phase
    sin_a, cos_a = np.sin(arg), np.cos(arg)
    g_amp = g_dyn * sin_a
    g_phase = g_dyn * amplitude * cos_a
    g_freq = g_phase * t
    return g_static, g_amp, g_freq, g_phase


# -- translation distance --------------------------------------------

def score_translation(diff, mask=None) -> np.ndarray:
    """-||diff|| (unsquared); an optional kept-scale dropout mask is
    applied to the difference vector before the norm."""
    diff = np.asarray(diff, dtype=np.float64)
    if mask is not None:
        diff = diff * mask
    return -np.sqrt(np.sum(diff * diff, axis=-1))


def grad_translation(diff, mask=None):
    """d score / d diff for the translation score."""
    diff = np.asarray(diff, dtype=np.float64)
    masked = diff if mask is None else diff * mask
    norm = np.sqrt(np.sum(masked * masked, axis=-1, keepdims=True))
    # Subgradient 0 at the (measure-zero) kink.
    safe = np.where(norm > 0, norm, 1.0)
    g = -masked / safe
    if mask is not None:
        g = g * mask
    return np.where(norm > 0, g, 0.0)


# -- trilinear product -----------------------------------------------

def score_trilinear(a, r, b, mask=None) -> np.ndarray:
    """sum_i a_i r_i b_i; dropout mask applies to the product vector."""
    p = np.asarray(a, dtype=np.float64) * r * b
    if mask is not None:
        p = p * mask
    return np.sum(p, axis=-1)


def grad_trilinear(a, r, b, mask=None):
    """Gradients of the trilinear score: (g_a, g_r, g_b)."""
    a, r, b = (np.asarray(x, dtype=np.float64) for x in (a, r, b))
    scale = 1.0 if mask is None else mask
    return r * b * scale, a * b * scale, a * r * scale


def dropout_mask(shape, rate, rng) -> np.ndarray | None:
    """Inverted-dropout mask with values in {0, 1/(1-rate)}."""
    if rate <= 0.0:
        return None
    if not rate < 1.0:
        raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
    keep = rng.random(shape) >= rate
    return keep.astype(np.float64) / (1.0 - rate)
