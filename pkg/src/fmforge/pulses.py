"""Frequency-modulation profiles.

A :class:`DiscretePulse` holds one drive frequency per equal-width segment.
A :class:`ContinuousPulse` holds one plateau value per segment; neighbouring
plateaus are joined by a half-cosine ramp one segment wide, centred on the
segment boundary. The plateau value is reached exactly at each segment centre,
the first half of the first segment and the last half of the last segment are
flat, and the profile is C1 everywhere.
"""
from dataclasses import dataclass, field, replace

import numpy as np

TWO_PI = 2 * np.pi
#: default number of segments per 200 us of pulse
SEGMENTS_PER_200US = 16
DEFAULT_SUBSTEPS = 20
WINDOW_MARGIN = TWO_PI * 50e3


class PulseError(ValueError):
    pass


def default_segments(duration):
    """Segment count scaled so that each segment is 12.5 us long."""
    return max(1, int(round(SEGMENTS_PER_200US * duration / 200e-6)))


def frequency_window(mode_freqs, margin=WINDOW_MARGIN):
    """(low, high) drive-frequency bounds around the sideband band."""
    freqs = np.asarray(mode_freqs)
    return float(freqs.min() - margin), float(freqs.max() + margin)


@dataclass(frozen=True, eq=False)
class DiscretePulse:
    segment_freqs: np.ndarray
    duration: float
    symmetric: bool = False
    omega: float = None
    meta: dict = field(default_factory=dict)

    kind = "discrete"

    def __post_init__(self):
        freqs = np.array(self.segment_freqs, dtype=float).reshape(-1)
        freqs.setflags(write=False)
        object.__setattr__(self, "segment_freqs", freqs)
        _check_common(freqs, self.duration)

    @property
    def n_segments(self):
        return len(self.segment_freqs)

    @property
    def params(self):
        return self.segment_freqs

    @property
    def dt(self):
        return self.duration / self.n_segments

    def with_params(self, params, **kw):
        return replace(self, segment_freqs=params, **kw)


@dataclass(frozen=True, eq=False)
class ContinuousPulse:
    step_freqs: np.ndarray
    duration: float
    substeps: int = DEFAULT_SUBSTEPS
    symmetric: bool = False
    omega: float = None
    meta: dict = field(default_factory=dict)

    kind = "continuous"

    def __post_init__(self):
        freqs = np.array(self.step_freqs, dtype=float).reshape(-1)
        freqs.setflags(write=False)
        object.__setattr__(self, "step_freqs", freqs)
        _check_common(freqs, self.duration)
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise PulseError(f"substeps must be a positive integer, got {self.substeps!r}")

    @property
    def n_segments(self):
        return len(self.step_freqs)

    @property
    def params(self):
        return self.step_freqs

    @property
    def dt(self):
        return self.duration / self.n_segments

    def with_params(self, params, **kw):
        return replace(self, step_freqs=params, **kw)


def _check_common(freqs, duration):
    if freqs.size < 1:
        raise PulseError("pulse needs at least one segment")
    if not np.all(np.isfinite(freqs)):
        raise PulseError("segment frequencies must be finite")
    if not duration > 0 or not np.isfinite(duration):
        raise PulseError(f"duration must be positive, got {duration!r}")


def _cosine_profile(t, values, dt):
    """Evaluate the cosine-joined profile; ``values`` may carry extra leading axes."""
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    pos = np.asarray(t, dtype=float) / dt - 0.5
    idx = np.clip(np.floor(pos).astype(int), 0, max(n - 2, 0))
    s = np.clip(pos - idx, 0.0, 1.0)
    if n == 1:
        return np.broadcast_to(values[..., :1], values.shape[:-1] + s.shape).copy()
    lo = values[..., idx]
    hi = values[..., idx + 1]
    w = 0.5 * (1.0 - np.cos(np.pi * s))
    return lo + (hi - lo) * w


def sample_drive(pulse, t):
    """Drive frequency (rad/s) at time ``t`` seconds (scalar or array)."""
    t_arr = np.asarray(t, dtype=float)
    tol = 1e-12 * pulse.duration
    if np.any(t_arr < -tol) or np.any(t_arr > pulse.duration + tol):
        raise PulseError("t outside [0, duration]")
    t_arr = np.clip(t_arr, 0.0, pulse.duration)
    if pulse.kind == "discrete":
        idx = np.minimum((t_arr / pulse.dt).astype(int), pulse.n_segments - 1)
        out = pulse.segment_freqs[idx]
    else:
        out = _cosine_profile(t_arr, pulse.step_freqs, pulse.dt)
    return out if out.ndim else float(out)


def fine_weights(n_segments, substeps):
    """Matrix W with ``fine_freqs = W @ step_freqs`` for the fine discretisation."""
    mid = (np.arange(n_segments * substeps) + 0.5) / substeps
    return _cosine_profile(mid, np.eye(n_segments), 1.0).T


def discretize_continuous(pulse):
    """Stepwise-constant version with ``n_segments * substeps`` steps.

    Each fine step takes the profile value at its midpoint.
    """
    if pulse.kind == "discrete":
        return pulse
    w = fine_weights(pulse.n_segments, pulse.substeps)
    return DiscretePulse(
        w @ pulse.step_freqs, pulse.duration, symmetric=pulse.symmetric,
        omega=pulse.omega, meta=dict(pulse.meta),
    )


def n_free(n_segments, symmetric):
    return (n_segments + 1) // 2 if symmetric else n_segments


def expand_params(half, n_segments):
    """Mirror ``ceil(n/2)`` free values into a time-symmetric list of ``n``."""
    half = np.asarray(half, dtype=float)
    if half.shape[-1] != n_free(n_segments, True):
        raise PulseError(
            f"need {n_free(n_segments, True)} free values for {n_segments} "
            f"segments, got {half.shape[-1]}"
        )
    tail = half[..., : n_segments // 2][..., ::-1]
    return np.concatenate([half, tail], axis=-1)


def fold_params(full):
    """Inverse of :func:`expand_params` (averages mirrored pairs)."""
    full = np.asarray(full, dtype=float)
    n = full.shape[-1]
    return (0.5 * (full + full[..., ::-1]))[..., : n_free(n, True)]


def fold_gradient(grad):
    """Gradient with respect to the free values of a symmetric pulse."""
    grad = np.asarray(grad, dtype=float)
    n = grad.shape[-1]
    h = n_free(n, True)
    out = grad[..., :h].copy()
    out[..., : n // 2] += grad[..., ::-1][..., : n // 2]
    return out


def expand_symmetric(half_params, n_segments, duration, kind="discrete",
                     substeps=DEFAULT_SUBSTEPS):
    """Build a time-symmetric pulse from its free half."""
    full = expand_params(half_params, n_segments)
    if kind == "discrete":
        return DiscretePulse(full, duration, symmetric=True)
    return ContinuousPulse(full, duration, substeps=substeps, symmetric=True)


def parameter_map(pulse):
    """Linear map L with ``fine_freqs = L @ free_params`` and the free params.

    Gradients with respect to the fine (evaluated) steps pull back to the
    free parameters as ``L.T @ grad``.
    """
    n = pulse.n_segments
    if pulse.symmetric:
        expand = np.zeros((n, n_free(n, True)))
        for i in range(n):
            expand[i, min(i, n - 1 - i)] = 1.0
        free = fold_params(pulse.params)
    else:
        expand = np.eye(n)
        free = np.array(pulse.params)
    if pulse.kind == "continuous":
        expand = fine_weights(n, pulse.substeps) @ expand
    return expand, free
