"""Mode phases, spin-dependent displacements and the two-qubit rotation angle.

Everything is evaluated in closed form on a stepwise-constant drive. With
``x_n = (mu_n - w_k - eps_k) * dt`` and ``z_n = exp(-i theta_k(t_{n-1}))`` the
per-mode integrals are

    disp  = int_0^tau exp(-i theta) dt
          = dt * sum_n z_n m0(x_n)
    avg   = int_0^tau int_0^t exp(-i theta(t')) dt' dt
          = dt^2 * sum_n z_n [(N - n) m0(x_n) + g(x_n)]
    phase = Im int_0^tau dt1 int_0^t1 dt2 exp(i[theta(t1) - theta(t2)])
          = dt^2 * Im sum_n [conj(c_n) sum_{m<n} c_m + conj(g(x_n))]

where ``c_n = z_n m0(x_n)``, ``g = m0 - m1`` and ``m_p`` are the moments from
:mod:`fmforge.kernels`. Prefix/suffix sums make values and gradients linear in
the number of segments.
"""
from dataclasses import dataclass

import numpy as np

from .kernels import moments
from .pulses import discretize_continuous, fine_weights

TARGET_ANGLE = np.pi / 4


@dataclass
class ModeIntegrals:
    disp: np.ndarray
    avg: np.ndarray
    phase: np.ndarray
    d_disp: np.ndarray = None
    d_avg: np.ndarray = None
    d_phase: np.ndarray = None


@dataclass
class PhaseTable:
    boundary_phases: np.ndarray
    detunings: np.ndarray


@dataclass
class GateOutcome:
    alpha: np.ndarray
    alpha_avg: np.ndarray
    theta: float
    omega: float
    sign: float = 1.0


def _detunings(freqs, mode_freqs, offsets):
    w = np.asarray(mode_freqs, dtype=float)
    if offsets is not None:
        w = w + np.asarray(offsets, dtype=float)
    return np.asarray(freqs, dtype=float)[..., None, :] - w[..., :, None]


def mode_integrals(freqs, dt, mode_freqs, offsets=None, grad=False):
    """Closed-form mode integrals for stepwise-constant ``freqs``.

    ``offsets`` may be ``None``, shape ``(K,)`` or ``(S, K)``; results carry the
    matching leading axes. Gradients are with respect to each ``freqs`` entry
    and have a trailing segment axis.
    """
    x = _detunings(freqs, mode_freqs, offsets) * dt
    n = x.shape[-1]
    m0, m1, m2 = moments(x, 2)
    phi_end = np.cumsum(x, axis=-1)
    z = np.exp(-1j * (phi_end - x))
    c = z * m0
    g = m0 - m1
    later = np.arange(n - 1, -1, -1)

    incl = np.cumsum(c, axis=-1)
    excl = incl - c
    disp = dt * incl[..., -1]
    avg_terms = z * (later * m0 + g)
    avg = dt**2 * avg_terms.sum(axis=-1)
    big_d = np.sum(np.conj(c) * excl + np.conj(g), axis=-1)
    out = ModeIntegrals(disp, avg, dt**2 * big_d.imag)
    if not grad:
        return out

    suffix = incl[..., -1:] - incl
    avg_suffix = np.cumsum(avg_terms[..., ::-1], axis=-1)[..., ::-1] - avg_terms
    dc = -1j * z * m1
    dm12 = m1 - m2
    # d/dx_n, then chain to mu_n via the factor dt
    out.d_disp = dt**2 * (dc - 1j * suffix)
    out.d_avg = dt**3 * (z * (-1j * later * m1 - 1j * dm12) - 1j * avg_suffix)
    sc = np.conj(suffix)
    dd = dc * sc + np.conj(dc) * excl + 1j * sc * incl + 1j * np.conj(dm12)
    out.d_phase = dt**3 * dd.imag
    return out


def naive_phase(freqs, dt, mode_freqs, offsets=None):
    """O(N^2) double-sum version of :attr:`ModeIntegrals.phase` and its gradient.

    Kept as an implementation cross-check for the prefix-sum algorithm.
    """
    x = _detunings(freqs, mode_freqs, offsets) * dt
    n = x.shape[-1]
    m0, m1, m2 = moments(x, 2)
    phi_start = np.cumsum(x, axis=-1) - x
    total = np.zeros(x.shape[:-1])
    grad = np.zeros(x.shape)
    for q in range(n):
        total += np.imag(np.conj(m0[..., q] - m1[..., q]))
        grad[..., q] += np.imag(1j * np.conj(m1[..., q] - m2[..., q]))
        for p in range(q):
            # conj(c_q) c_p = conj(m0_q) m0_p exp(i (phi_q - phi_p))
            ph = np.exp(1j * (phi_start[..., q] - phi_start[..., p]))
            term = np.conj(m0[..., q]) * m0[..., p] * ph
            total += term.imag
            grad[..., q] += np.imag(np.conj(-1j * m1[..., q]) * m0[..., p] * ph)
            grad[..., p] += np.imag(np.conj(m0[..., q]) * (-1j * m1[..., p]) * ph)
            # phases after segment p, up to and including q-1, shift the pair
            for r in range(p, q):
                grad[..., r] += np.imag(1j * term)
    return dt**2 * total, dt**3 * grad


def _fine(pulse):
    """Stepwise-constant frequencies actually evaluated, plus their step width."""
    fine = discretize_continuous(pulse)
    return fine.segment_freqs, fine.dt


def _pullback(pulse, grad):
    # gradient w.r.t. fine steps -> w.r.t. the pulse's own parameters
    if pulse.kind == "continuous":
        return grad @ fine_weights(pulse.n_segments, pulse.substeps)
    return grad


def evaluate(pulse, modes, offsets=None, grad=False):
    """:func:`mode_integrals` for any pulse kind."""
    freqs, dt = _fine(pulse)
    out = mode_integrals(freqs, dt, modes.mode_freqs, offsets, grad)
    if grad:
        out.d_disp = _pullback(pulse, out.d_disp)
        out.d_avg = _pullback(pulse, out.d_avg)
        out.d_phase = _pullback(pulse, out.d_phase)
    return out


def phase_table(pulse, modes, offsets=None):
    """Boundary phases theta_k(t_n), shape ``(K, N+1)``, and segment detunings."""
    freqs, dt = _fine(pulse)
    delta = _detunings(freqs, modes.mode_freqs, offsets)
    phases = np.cumsum(delta * dt, axis=-1)
    zero = np.zeros(phases.shape[:-1] + (1,))
    return PhaseTable(np.concatenate([zero, phases], axis=-1), delta)


def _eta(modes, ion):
    return np.asarray(modes.lamb_dicke)[:, ion]


def _pair_coupling(modes, pair):
    j1, j2 = pair
    if j1 == j2:
        raise ValueError("ion pair must contain two distinct ions")
    return _eta(modes, j1) * _eta(modes, j2)


def displacement(pulse, modes, ion, omega, offsets=None):
    """alpha_k^j(tau) for every mode k."""
    return 0.5 * omega * _eta(modes, ion) * evaluate(pulse, modes, offsets).disp


def avg_displacement(pulse, modes, ion, omega, offsets=None):
    """Time-averaged displacement (1/tau) (Omega/2) eta int int exp(-i theta)."""
    avg = evaluate(pulse, modes, offsets).avg
    return 0.5 * omega * _eta(modes, ion) * avg / pulse.duration


def rotation_angle(pulse, modes, pair, omega, offsets=None):
    """Two-qubit rotation angle Theta(tau) in radians."""
    phase = evaluate(pulse, modes, offsets).phase
    return -0.5 * omega**2 * np.sum(_pair_coupling(modes, pair) * phase, axis=-1)


def naive_rotation_angle(pulse, modes, pair, omega, offsets=None):
    """Quadratic-time rotation angle and its gradient (cross-check only)."""
    freqs, dt = _fine(pulse)
    phase, dphase = naive_phase(freqs, dt, modes.mode_freqs, offsets)
    coup = _pair_coupling(modes, pair)
    theta = -0.5 * omega**2 * np.sum(coup * phase, axis=-1)
    grad = -0.5 * omega**2 * np.sum(coup[:, None] * dphase, axis=-2)
    return theta, _pullback(pulse, grad)


def grad_displacement(pulse, modes, ion, omega, offsets=None):
    """Complex Jacobian d alpha_k / d mu_n, shape ``(..., K, n_params)``."""
    d = evaluate(pulse, modes, offsets, grad=True).d_disp
    return 0.5 * omega * _eta(modes, ion)[:, None] * d


def grad_avg_displacement(pulse, modes, ion, omega, offsets=None):
    d = evaluate(pulse, modes, offsets, grad=True).d_avg
    return 0.5 * omega * _eta(modes, ion)[:, None] * d / pulse.duration


def grad_rotation_angle(pulse, modes, pair, omega, offsets=None):
    """d Theta / d mu_n, shape ``(..., n_params)``."""
    d = evaluate(pulse, modes, offsets, grad=True).d_phase
    coup = _pair_coupling(modes, pair)
    return -0.5 * omega**2 * np.sum(coup[:, None] * d, axis=-2)


def gate_outcome(pulse, modes, pair, omega=None, offsets=None):
    """Displacements, averaged displacements and angle from one evaluation."""
    if omega is None:
        omega = pulse.omega
    if omega is None:
        raise ValueError("pulse has no calibrated omega; pass one explicitly")
    ints = evaluate(pulse, modes, offsets)
    eta = np.asarray(modes.lamb_dicke)[:, list(pair)]
    alpha = 0.5 * omega * eta * ints.disp[..., :, None]
    alpha_avg = 0.5 * omega * eta * ints.avg[..., :, None] / pulse.duration
    coup = _pair_coupling(modes, pair)
    theta = -0.5 * omega**2 * np.sum(coup * ints.phase, axis=-1)
    if offsets is None:
        ref = theta
    else:
        ref = -np.sum(coup * evaluate(pulse, modes).phase)
    return GateOutcome(alpha, alpha_avg, theta, omega, float(np.sign(ref)) or 1.0)


def trajectory(pulse, modes, pair, omega, offsets=None):
    """alpha_k^j(t) and Theta(t) at every (fine) step boundary.

    Returns ``(times, alpha, theta)`` with ``alpha`` shaped ``(K, 2, N+1)``.
    """
    freqs, dt = _fine(pulse)
    x = _detunings(freqs, modes.mode_freqs, offsets) * dt
    m0, m1 = moments(x, 1)
    z = np.exp(-1j * (np.cumsum(x, axis=-1) - x))
    c = z * m0
    incl = np.cumsum(c, axis=-1)
    excl = incl - c
    zero = np.zeros(x.shape[:-1] + (1,))
    disp = dt * np.concatenate([zero, incl], axis=-1)
    big_d = np.cumsum(np.conj(c) * excl + np.conj(m0 - m1), axis=-1)
    phase = dt**2 * np.concatenate([zero, big_d.imag], axis=-1)
    eta = np.asarray(modes.lamb_dicke)[:, list(pair)]
    alpha = 0.5 * omega * eta[..., None] * disp[..., :, None, :]
    coup = _pair_coupling(modes, pair)
    theta = -0.5 * omega**2 * np.sum(coup[:, None] * phase, axis=-2)
    times = np.arange(x.shape[-1] + 1) * dt
    return times, alpha, theta
