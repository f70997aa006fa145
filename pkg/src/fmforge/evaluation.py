"""Robustness evaluation of optimised pulses.

Test-set fidelities, 2-D error landscapes, trajectories, gate-sequence
populations, the time-averaged-displacement (dephasing) metric, and the
scalability and batch-size studies.
"""
import itertools
import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import dynamics
from .objectives import FidelityConfig, GateProblem, avg_displacement_cost
from .optimizer import OptimizationError, multi_trial, optimize, sample_offsets
from .pulses import DiscretePulse, discretize_continuous, parameter_map

log = logging.getLogger(__name__)

TWO_PI = 2 * np.pi
DEFAULT_TEST_SIZE = 1000
DEFAULT_THRESHOLD = 1e-3
LANDSCAPE_SPAN = TWO_PI * 3e3
LANDSCAPE_POINTS = 61
OFFSET_MODELS = ("iid", "common", "grid")


def _setup(pulse, modes, pair, omega=None):
    """Fine frequencies, step width, problem, Omega and angle sign for a pulse."""
    prob = GateProblem(modes, pair)
    lmap, free = parameter_map(pulse)
    freqs = lmap @ free
    dt = pulse.duration / len(freqs)
    cal_omega, sign = prob.calibrate(freqs, dt)
    if omega is None:
        omega = pulse.omega if pulse.omega is not None else cal_omega
    return prob, freqs, dt, float(omega), sign


def common_offsets(shift, n_modes):
    """Offset vectors for a uniform shift of every mode; ``shift`` may be an array."""
    shift = np.atleast_1d(np.asarray(shift, dtype=float))
    return np.repeat(shift[:, None], n_modes, axis=1)


def make_offsets(model, n_modes, uncertainty=0.0, count=1, seed=0, shift=0.0):
    """Offsets for one of the three models: ``iid``, ``common`` or ``grid``.

    ``grid`` is handled by :func:`error_landscape`; here it is rejected.
    """
    if model == "iid":
        return sample_offsets(uncertainty, n_modes, count, (seed, "test"), role="test").offsets
    if model == "common":
        return common_offsets(shift, n_modes)
    if model == "grid":
        raise ValueError("grid offsets are built by error_landscape")
    raise ValueError(f"unknown offset model {model!r}; choose from {OFFSET_MODELS}")


def fidelities(pulse, modes, pair, offsets, fcfg=None, omega=None):
    """Second-order fidelity F(eps) at each row of ``offsets``."""
    fcfg = fcfg or FidelityConfig()
    prob, freqs, dt, omega, sign = _setup(pulse, modes, pair, omega)
    sign = pulse.meta.get("angle_sign", sign)
    nbar = fcfg.nbar_array(modes.n_modes)
    return prob.fidelities(freqs, dt, np.atleast_2d(offsets), omega, nbar, sign)


def test_fidelity(pulse, modes, pair, uncertainty, test_size=DEFAULT_TEST_SIZE, fcfg=None,
                  seed=0):
    """Mean, std and per-sample fidelity over a seeded test set.

    The test set comes from its own random stream, independent of any
    training, batch or cross-validation samples drawn with the same seed.
    """
    test = sample_offsets(uncertainty, modes.n_modes, test_size, (seed, "test"), role="test")
    fid = fidelities(pulse, modes, pair, test.offsets, fcfg)
    return float(fid.mean()), float(fid.std()), fid


# pytest would otherwise try to collect the function above
test_fidelity.__test__ = False


@dataclass
class Landscape:
    eps1_grid: np.ndarray
    eps2_grid: np.ndarray
    error: np.ndarray
    threshold: float = DEFAULT_THRESHOLD
    modes_used: tuple = (0, 1)

    @property
    def cell_area(self):
        return float(np.ptp(self.eps1_grid) / (len(self.eps1_grid) - 1)
                     * np.ptp(self.eps2_grid) / (len(self.eps2_grid) - 1))

    def area_at(self, threshold):
        """(rad/s)^2 area of grid cells with error below ``threshold``."""
        return int(np.count_nonzero(self.error < threshold)) * self.cell_area

    @property
    def area(self):
        return self.area_at(self.threshold)

    def rows(self):
        """(eps1, eps2, error) triples, eps2 varying fastest."""
        e1, e2 = np.meshgrid(self.eps1_grid, self.eps2_grid, indexing="ij")
        return np.column_stack([e1.ravel(), e2.ravel(), self.error.ravel()])


def error_landscape(pulse, modes, pair=(0, 1), span=LANDSCAPE_SPAN, points=LANDSCAPE_POINTS,
                    fcfg=None, threshold=DEFAULT_THRESHOLD, eps1_grid=None, eps2_grid=None,
                    modes_used=(0, 1)):
    """Gate error 1 - F over a grid of offsets of two modes (others nominal).

    ``error[i, j]`` belongs to ``(eps1_grid[i], eps2_grid[j])``. Errors are
    clipped to [0, 2]; the second-order fidelity can leave [-1, 1] far from
    the working point.
    """
    if eps1_grid is None:
        eps1_grid = np.linspace(-span, span, points)
    if eps2_grid is None:
        eps2_grid = np.linspace(-span, span, points)
    eps1_grid = np.asarray(eps1_grid, dtype=float)
    eps2_grid = np.asarray(eps2_grid, dtype=float)
    if len(eps1_grid) < 2 or len(eps2_grid) < 2:
        raise ValueError("landscape grids need at least two points per axis")
    k1, k2 = modes_used
    e1, e2 = np.meshgrid(eps1_grid, eps2_grid, indexing="ij")
    offsets = np.zeros((e1.size, modes.n_modes))
    offsets[:, k1] = e1.ravel()
    offsets[:, k2] = e2.ravel()
    fid = fidelities(pulse, modes, pair, offsets, fcfg)
    err = np.clip(1 - fid, 0.0, 2.0).reshape(e1.shape)
    return Landscape(eps1_grid, eps2_grid, err, threshold, (k1, k2))


@dataclass
class Trajectory:
    times: np.ndarray
    alpha: np.ndarray
    theta: np.ndarray


def trajectory(pulse, modes, pair, omega=None, offsets=None, n_times=None):
    """alpha_k^j(t) (shape ``(K, 2, T)``) and Theta(t) at step boundaries.

    With ``n_times`` the boundaries are thinned to that many evenly spaced
    indices; the first and last are always kept.
    """
    if omega is None:
        omega = _setup(pulse, modes, pair)[3]
    times, alpha, theta = dynamics.trajectory(pulse, modes, pair, omega, offsets)
    if n_times is not None:
        if n_times < 2:
            raise ValueError("n_times must be at least 2")
        idx = np.unique(np.linspace(0, len(times) - 1, n_times).round().astype(int))
        times, alpha, theta = times[idx], alpha[..., idx], theta[..., idx]
    return Trajectory(times, alpha, theta)


def repeat_pulse(pulse, n_gates):
    """One stepwise drive made of ``n_gates`` copies of the pulse profile."""
    if int(n_gates) != n_gates or n_gates < 1:
        raise ValueError(f"n_gates must be a positive integer, got {n_gates!r}")
    fine = discretize_continuous(pulse)
    return DiscretePulse(np.tile(fine.segment_freqs, int(n_gates)),
                         pulse.duration * n_gates, omega=pulse.omega)


_SPINS = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]])
# columns: |+>, |-> written in the z basis
_HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2)
_H2 = np.kron(_HADAMARD, _HADAMARD)


def spin_density_matrix(alpha, theta, nbar):
    """Two-qubit state after the gate acting on |00> with thermal motion.

    ``alpha`` is ``(..., K, 2)`` and ``theta`` has the matching leading
    shape. Returns the z-basis density matrix ``(..., 4, 4)``.
    """
    alpha = np.asarray(alpha)
    theta = np.asarray(theta, dtype=float)
    nbar = np.asarray(nbar, dtype=float)
    # beta[..., s, k] = s1 alpha^j1_k + s2 alpha^j2_k
    beta = np.einsum("si,...ki->...sk", _SPINS, alpha)
    phase = theta[..., None] * (_SPINS[:, 0] * _SPINS[:, 1])
    b_row = beta[..., :, None, :]
    b_col = beta[..., None, :, :]
    # Tr[rho_th D(b')^dag D(b)] with b' the column branch
    overlap = np.exp(1j * np.imag(np.conj(b_col) * b_row)
                     - np.abs(b_row - b_col) ** 2 * (nbar + 0.5)).prod(axis=-1)
    rho_x = 0.25 * np.exp(1j * (phase[..., :, None] - phase[..., None, :])) * overlap
    return _H2 @ rho_x @ _H2.T


@dataclass
class Populations:
    detuning: np.ndarray
    p00: np.ndarray
    p11: np.ndarray
    p_odd: np.ndarray
    parity_contrast: np.ndarray


def sequence_populations(pulse, modes, pair, n_gates=1, detuning_offset=0.0, nbar=0.5,
                         omega=None):
    """Populations after ``n_gates`` back-to-back gates starting in |00>.

    ``detuning_offset`` (rad/s, scalar or array) shifts the drive relative to
    every mode, i.e. all mode offsets equal ``-detuning_offset``. The
    sequence is one concatenated drive, so phases carry across gates.
    """
    if omega is None:
        omega = _setup(pulse, modes, pair)[3]
    seq = repeat_pulse(pulse, n_gates)
    det = np.atleast_1d(np.asarray(detuning_offset, dtype=float))
    out = dynamics.gate_outcome(seq, modes, pair, omega, common_offsets(-det, modes.n_modes))
    nbar = FidelityConfig(nbar).nbar_array(modes.n_modes)
    rho = spin_density_matrix(out.alpha, out.theta, nbar)
    pops = np.real(np.diagonal(rho, axis1=-2, axis2=-1))
    return Populations(det, pops[:, 0], pops[:, 3], pops[:, 1] + pops[:, 2],
                       2 * np.abs(rho[:, 0, 3]))


def dephasing_metric(pulse, modes, pair, uncertainty, test_size=DEFAULT_TEST_SIZE, seed=0):
    """Mean time-averaged displacement error over a seeded test set."""
    test = sample_offsets(uncertainty, modes.n_modes, test_size, (seed, "test"), role="test")
    return avg_displacement_cost(pulse, modes, pair, test)


def gate_pairs(n_ions):
    """Ion pairs used in sweeps; edge ions are dropped for six or more ions."""
    ions = range(n_ions) if n_ions < 6 else range(1, n_ions - 1)
    return list(itertools.combinations(ions, 2))


@dataclass
class SweepReport:
    entries: list = field(default_factory=list)

    def summary(self):
        """Per chain length: mean and std of fidelity, Omega and wall time."""
        out = {}
        for n in sorted({e["n_ions"] for e in self.entries}):
            ok = [e for e in self.entries if e["n_ions"] == n and e["error"] is None]
            row = {"pairs": len(ok),
                   "failed": sum(e["n_ions"] == n and e["error"] is not None
                                 for e in self.entries)}
            for key in ("fidelity", "omega_rad_s", "wall_time_s"):
                vals = np.array([e[key] for e in ok], dtype=float)
                row[key] = (float(vals.mean()), float(vals.std())) if len(vals) else (np.nan, np.nan)
            out[n] = row
        return out


def _fit(spec, modes, pair):
    return multi_trial(spec, modes, pair) if spec.trials > 1 else optimize(spec, modes, pair)


def scalability_sweep(spec, n_ions_list, modes_for, pairs=None, test_size=DEFAULT_TEST_SIZE,
                      fcfg=None):
    """Optimise and test every gate pair for each chain length.

    ``modes_for(n)`` returns the :class:`ModeStructure` of an ``n``-ion chain.
    ``pairs`` optionally maps ``n`` to an explicit pair list. Failures are
    recorded per pair and the sweep carries on.
    """
    report = SweepReport()
    for n in n_ions_list:
        modes = modes_for(n)
        for pair in (pairs or {}).get(n, gate_pairs(n)):
            entry = {"n_ions": n, "pair": list(pair), "fidelity": np.nan, "omega_rad_s": np.nan,
                     "wall_time_s": np.nan, "error": None}
            t0 = time.perf_counter()
            try:
                run = _fit(spec, modes, pair)
                entry["wall_time_s"] = time.perf_counter() - t0
                entry["fidelity"] = test_fidelity(run.selected, modes, pair, spec.uncertainty,
                                                  test_size, fcfg, spec.seed)[0]
                entry["omega_rad_s"] = run.selected.omega
            except (OptimizationError, ArithmeticError, FloatingPointError) as exc:
                log.warning("N=%d pair %s failed: %s", n, pair, exc)
                entry["error"] = str(exc)
            report.entries.append(entry)
    return report


def batch_size_study(spec, modes, pair, sizes=(1, 10, 100), eval_budget=15000,
                     test_size=DEFAULT_TEST_SIZE, fcfg=None):
    """b-robust runs at a fixed number of sample evaluations per run.

    Each batch size ``b`` runs ``eval_budget // b`` iterations.
    """
    results = []
    for b in sizes:
        if b < 1 or eval_budget % b:
            raise ValueError(f"batch size {b} does not divide the budget {eval_budget}")
        sub = replace(spec, method="b_robust", batch_size=int(b), iterations=eval_budget // b)
        run = _fit(sub, modes, pair)
        mean_f = test_fidelity(run.selected, modes, pair, spec.uncertainty, test_size, fcfg,
                               spec.seed)[0]
        results.append({"batch_size": int(b), "iterations": sub.iterations,
                        "learning_curve": run.costs, "error": 1 - mean_f,
                        "omega_rad_s": run.selected.omega, "pulse": run.selected})
    return results
