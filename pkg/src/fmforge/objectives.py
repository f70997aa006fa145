"""Gate costs, Rabi-frequency calibration and the second-order fidelity.

Costs for the sampled schemes are written in terms of unit-Rabi-frequency
quantities

    a(eps) = sum_k (eta1_k^2 + eta2_k^2) / 4 * |disp_k(eps)|^2
    t(eps) = -1/2 sum_k eta1_k eta2_k * phase_k(eps)

so that at Rabi frequency ``Omega`` the displacement error is ``Omega^2 a``
and the angle is ``Omega^2 t``. Calibration fixes ``Omega^2 = (pi/4) / |t(0)|``
and the target angle to ``s * pi/4`` with ``s = sign(t(0))``.
"""
from dataclasses import dataclass, field

import numpy as np

from .dynamics import TARGET_ANGLE, mode_integrals
from .pulses import parameter_map

DEFAULT_NBAR = 0.5


class CalibrationError(ArithmeticError):
    """The pulse produces no two-qubit rotation, so Omega is undefined."""


@dataclass
class SampleSet:
    offsets: np.ndarray
    role: str = "training"
    uncertainty: float = 0.0
    seed: int = None

    def __post_init__(self):
        self.offsets = np.atleast_2d(np.asarray(self.offsets, dtype=float))

    def __len__(self):
        return len(self.offsets)


@dataclass
class CostReport:
    total: float
    displacement_term: np.ndarray
    angle_term: np.ndarray
    per_sample: np.ndarray
    omega: float = None
    sign: float = 1.0


@dataclass
class FidelityConfig:
    nbar: object = DEFAULT_NBAR

    def nbar_array(self, n_modes):
        nbar = np.broadcast_to(np.asarray(self.nbar, dtype=float), (n_modes,))
        if np.any(nbar < 0):
            raise ValueError("mean phonon numbers must be non-negative")
        return nbar


class GateProblem:
    """Mode data and ion pair, with costs evaluated on fine-step frequencies.

    This is the hot path used by the optimisers; the module-level functions
    wrap it for pulse objects.
    """

    def __init__(self, modes, pair):
        j1, j2 = pair
        if j1 == j2:
            raise ValueError("ion pair must contain two distinct ions")
        eta = np.asarray(modes.lamb_dicke)
        self.modes = modes
        self.pair = (int(j1), int(j2))
        self.mode_freqs = np.asarray(modes.mode_freqs, dtype=float)
        self.disp_weight = 0.25 * (eta[:, j1] ** 2 + eta[:, j2] ** 2)
        self.coupling = eta[:, j1] * eta[:, j2]

    def unit_angle(self, freqs, dt, grad=False):
        ints = mode_integrals(freqs, dt, self.mode_freqs, None, grad=grad)
        t = -0.5 * np.dot(self.coupling, ints.phase)
        if not grad:
            return t
        return t, -0.5 * self.coupling @ ints.d_phase

    def calibrate(self, freqs, dt):
        t0 = self.unit_angle(freqs, dt)
        return _calibration(t0)

    def batch(self, freqs, dt, offsets, grad=True, displacement_only=False):
        """Mean calibrated cost over ``offsets`` and its gradient (fine steps).

        The gradient includes the dependence of Omega on the pulse through
        the calibration.
        """
        offsets = np.atleast_2d(offsets)
        if len(offsets) == 0:
            raise ValueError("empty sample set")
        t0, dt0 = self.unit_angle(freqs, dt, grad=True)
        omega, sign = _calibration(t0)
        omega2 = omega**2
        ints = mode_integrals(freqs, dt, self.mode_freqs, offsets, grad=grad)
        a = np.sum(self.disp_weight * np.abs(ints.disp) ** 2, axis=-1)
        disp_term = omega2 * a
        if displacement_only:
            t = np.zeros(len(offsets))
            ang_err = np.zeros(len(offsets))
        else:
            t = -0.5 * ints.phase @ self.coupling
            ang_err = omega2 * t - sign * TARGET_ANGLE
        per = disp_term + 0.5 * ang_err**2
        report = CostReport(float(per.mean()), disp_term, 0.5 * ang_err**2, per,
                            omega, sign)
        if not grad:
            return report.total, None, report
        da = 2 * np.real(np.conj(ints.disp)[..., None] * ints.d_disp)
        da = np.einsum("k,skn->sn", self.disp_weight, da)
        g = omega2 * da
        dw = a
        if not displacement_only:
            dtt = -0.5 * np.einsum("k,skn->sn", self.coupling, ints.d_phase)
            g = g + ang_err[:, None] * omega2 * dtt
            dw = a + ang_err * t
        # d(Omega^2) = -Omega^2 dt0 / t0
        domega2 = -omega2 * dt0 / t0
        g = g + dw[:, None] * domega2[None, :]
        return report.total, g.mean(axis=0), report

    def nonrobust(self, freqs, dt, grad=True):
        ints = mode_integrals(freqs, dt, self.mode_freqs, None, grad=grad)
        val = float(np.dot(self.disp_weight, np.abs(ints.disp) ** 2))
        if not grad:
            return val, None
        d = 2 * np.real(np.conj(ints.disp)[:, None] * ints.d_disp)
        return val, self.disp_weight @ d

    def robust(self, freqs, dt, grad=True):
        tau = dt * len(freqs)
        ints = mode_integrals(freqs, dt, self.mode_freqs, None, grad=grad)
        val = float(np.dot(self.disp_weight, np.abs(ints.avg) ** 2)) / tau**2
        if not grad:
            return val, None
        d = 2 * np.real(np.conj(ints.avg)[:, None] * ints.d_avg) / tau**2
        return val, self.disp_weight @ d

    def avg_cost(self, freqs, dt, offsets, omega):
        tau = dt * len(freqs)
        ints = mode_integrals(freqs, dt, self.mode_freqs, np.atleast_2d(offsets))
        per = omega**2 * np.sum(self.disp_weight * np.abs(ints.avg) ** 2, axis=-1) / tau**2
        return per

    def fidelities(self, freqs, dt, offsets, omega, nbar, sign=None):
        if sign is None:
            sign = np.sign(self.unit_angle(freqs, dt)) or 1.0
        ints = mode_integrals(freqs, dt, self.mode_freqs, np.atleast_2d(offsets))
        theta = omega**2 * (-0.5 * ints.phase @ self.coupling)
        weight = self.disp_weight * (np.asarray(nbar) + 0.5)
        disp = omega**2 * np.sum(weight * np.abs(ints.disp) ** 2, axis=-1)
        return np.cos(theta - sign * TARGET_ANGLE) * np.maximum(1 - disp, 0.0)


def _calibration(t0):
    if not np.isfinite(t0) or abs(t0) < 1e-18:
        raise CalibrationError(
            f"unit-Rabi rotation angle {t0!r} is too small to calibrate"
        )
    return float(np.sqrt(TARGET_ANGLE / abs(t0))), float(np.sign(t0))


def _fine_setup(pulse):
    lmap, free = parameter_map(pulse)
    dt = pulse.duration / lmap.shape[0]
    return lmap, free, dt


def calibrate_omega(pulse, modes, pair):
    """Rabi frequency (rad/s) giving |Theta(tau, 0)| = pi/4."""
    lmap, free, dt = _fine_setup(pulse)
    return GateProblem(modes, pair).calibrate(lmap @ free, dt)[0]


def angle_sign(pulse, modes, pair):
    """Sign of the rotation angle; the calibrated target is ``sign * pi/4``."""
    lmap, free, dt = _fine_setup(pulse)
    t0 = GateProblem(modes, pair).unit_angle(lmap @ free, dt)
    return _calibration(t0)[1]


def cost_sample(outcome, sign=None):
    """C(eps) = sum_k (|alpha^j1|^2 + |alpha^j2|^2) + (Theta - s pi/4)^2 / 2."""
    sign = outcome.sign if sign is None else sign
    disp = np.sum(np.abs(outcome.alpha) ** 2, axis=(-2, -1))
    ang = 0.5 * (outcome.theta - sign * TARGET_ANGLE) ** 2
    return CostReport(float(np.mean(disp + ang)), disp, ang, np.atleast_1d(disp + ang),
                      outcome.omega, sign)


def cost_batch(pulse, modes, pair, samples, displacement_only=False):
    """(C_E, gradient over the pulse's free parameters, CostReport).

    Omega is recalibrated for ``pulse`` before evaluation.
    """
    offsets = samples.offsets if isinstance(samples, SampleSet) else samples
    lmap, free, dt = _fine_setup(pulse)
    val, g, rep = GateProblem(modes, pair).batch(
        lmap @ free, dt, offsets, displacement_only=displacement_only)
    return val, g @ lmap, rep


def nonrobust_cost(pulse, modes, pair):
    """sum_j sum_k |alpha_k^j(tau, 0)|^2 at unit Rabi frequency, with gradient."""
    lmap, free, dt = _fine_setup(pulse)
    val, g = GateProblem(modes, pair).nonrobust(lmap @ free, dt)
    return val, g @ lmap


def robust_cost(pulse, modes, pair):
    """sum_j sum_k |alpha_avg_k^j|^2 at unit Rabi frequency, with gradient.

    Only time-symmetric pulses qualify: for them a vanishing time-averaged
    displacement also closes every phase-space loop.
    """
    if not pulse.symmetric:
        raise ValueError("robust cost requires a time-symmetric pulse")
    lmap, free, dt = _fine_setup(pulse)
    val, g = GateProblem(modes, pair).robust(lmap @ free, dt)
    return val, g @ lmap


def avg_displacement_cost(pulse, modes, pair, test, omega=None):
    """Mean time-averaged displacement error over a test set, at calibrated Omega."""
    offsets = test.offsets if isinstance(test, SampleSet) else np.atleast_2d(test)
    if len(offsets) == 0:
        raise ValueError("empty sample set")
    lmap, free, dt = _fine_setup(pulse)
    prob = GateProblem(modes, pair)
    if omega is None:
        omega = pulse.omega if pulse.omega is not None else prob.calibrate(lmap @ free, dt)[0]
    return float(np.mean(prob.avg_cost(lmap @ free, dt, offsets, omega)))


def fidelity(outcome, fcfg=None, sign=None):
    """Second-order average gate fidelity for one outcome."""
    fcfg = fcfg or FidelityConfig()
    sign = outcome.sign if sign is None else sign
    alpha = np.asarray(outcome.alpha)
    nbar = fcfg.nbar_array(alpha.shape[-2])
    disp = np.sum(np.abs(alpha) ** 2 * (nbar[:, None] + 0.5), axis=(-2, -1))
    # the expansion is meaningless once the motional factor goes negative;
    # flooring it keeps F <= 1 so a wildly displaced gate never scores as perfect
    return np.cos(outcome.theta - sign * TARGET_ANGLE) * np.maximum(1 - disp, 0.0)
