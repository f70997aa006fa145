"""Pulse optimisation: nonrobust, robust, s-robust and b-robust schemes."""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import mode_integrals
from .objectives import CalibrationError, GateProblem, SampleSet
from .pulses import (
    DEFAULT_SUBSTEPS, WINDOW_MARGIN, ContinuousPulse, DiscretePulse, default_segments,
    frequency_window, n_free, parameter_map,
)

log = logging.getLogger(__name__)

TWO_PI = 2 * np.pi
METHODS = ("nonrobust", "robust", "s_robust", "b_robust")
DEFAULT_ITERATIONS = {"nonrobust": 300, "robust": 300, "s_robust": 1500, "b_robust": 1500}

# spawn keys for the named random streams derived from one master seed
STREAMS = {"initial": 1, "training": 2, "batch": 3, "cv": 4, "test": 5}


class OptimizationError(RuntimeError):
    pass


def stream(seed, purpose, *index):
    """Independent, reproducible generator for ``(seed, purpose, index...)``.

    Uses a counter-based bit generator so streams do not depend on the order
    in which they are requested.
    """
    key = (STREAMS[purpose],) + tuple(int(i) for i in index)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=key)))


def sample_offsets(uncertainty, n_modes, count, stream_seed, role="training"):
    """``count`` offset vectors with iid N(0, uncertainty) entries (rad/s).

    ``stream_seed`` is an int or a ``(seed, purpose, *index)`` tuple.
    """
    if uncertainty < 0:
        raise ValueError("uncertainty must be non-negative")
    if isinstance(stream_seed, tuple):
        rng = stream(*stream_seed)
    else:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(stream_seed))))
    offsets = rng.normal(0.0, 1.0, size=(count, n_modes)) * uncertainty
    return SampleSet(offsets, role=role, uncertainty=uncertainty, seed=stream_seed)


@dataclass(frozen=True)
class AdamHyper:
    lr: float = TWO_PI * 200.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n), np.zeros(n), 0)


def adam_step(params, grad, state, hyper=AdamHyper()):
    """One bias-corrected adaptive-moment update. Returns ``(params, state)``."""
    grad = np.asarray(grad, dtype=float)
    if not np.all(np.isfinite(grad)):
        raise OptimizationError("non-finite gradient")
    t = state.t + 1
    m = hyper.beta1 * state.m + (1 - hyper.beta1) * grad
    v = hyper.beta2 * state.v + (1 - hyper.beta2) * grad * grad
    m_hat = m / (1 - hyper.beta1**t)
    v_hat = v / (1 - hyper.beta2**t)
    new = np.asarray(params, dtype=float) - hyper.lr * m_hat / (np.sqrt(v_hat) + hyper.eps)
    return new, AdamState(m, v, t)


@dataclass(frozen=True)
class ObjectiveSpec:
    """Settings for one optimisation. Frequencies in rad/s, times in seconds."""

    method: str = "b_robust"
    uncertainty: float = TWO_PI * 1e3
    training_size: int = 100
    batch_size: int = 10
    iterations: int = None
    trials: int = 10
    cv_size: int = 200
    pulse_kind: str = "discrete"
    continuous_displacement_only: bool = True
    seed: int = 0
    duration: float = 200e-6
    n_segments: int = None
    substeps: int = DEFAULT_SUBSTEPS
    learning_rate: float = TWO_PI * 200.0
    warmup: int = 50
    window_margin: float = WINDOW_MARGIN
    initial_jitter: float = TWO_PI * 5e3
    threads: int = 1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.pulse_kind not in ("discrete", "continuous"):
            raise ValueError(f"unknown pulse kind {self.pulse_kind!r}")
        if self.iterations is None:
            object.__setattr__(self, "iterations", DEFAULT_ITERATIONS[self.method])
        if self.n_segments is None:
            object.__setattr__(self, "n_segments", default_segments(self.duration))
        for name in ("training_size", "batch_size", "trials", "cv_size", "n_segments",
                     "substeps"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.iterations < 0 or self.uncertainty < 0 or self.duration <= 0:
            raise ValueError("iterations, uncertainty and duration must be non-negative")

    @property
    def symmetric(self):
        return self.method == "robust"

    @property
    def displacement_only(self):
        return self.pulse_kind == "continuous" and self.continuous_displacement_only

    @property
    def samples_per_iteration(self):
        return {"s_robust": self.training_size, "b_robust": self.batch_size}.get(self.method, 1)


@dataclass
class TrialResult:
    pulse: object
    cv_score: float
    learning_curve: list
    wall_time: float
    seed: tuple
    error: str = None


@dataclass
class OptimizationRun:
    learning_curve: list
    trial_results: list
    selected: object
    wall_times: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)

    @property
    def costs(self):
        return np.array([row["cost"] for row in self.learning_curve])


def make_pulse(spec, params, omega=None, **meta):
    """Pulse of the kind described by ``spec`` from its free parameters."""
    from .pulses import expand_params

    full = expand_params(params, spec.n_segments) if spec.symmetric else np.asarray(params)
    meta = {"method": spec.method, "uncertainty_kHz": spec.uncertainty / TWO_PI / 1e3,
            "seed": spec.seed, **meta}
    if spec.pulse_kind == "discrete":
        return DiscretePulse(full, spec.duration, symmetric=spec.symmetric, omega=omega, meta=meta)
    return ContinuousPulse(full, spec.duration, substeps=spec.substeps,
                           symmetric=spec.symmetric, omega=omega, meta=meta)


def initial_guess(spec, modes, trial=0):
    """Random starting pulse: one common frequency drawn uniformly from the
    sideband window, plus independent Gaussian jitter of ``spec.initial_jitter``
    on every free segment, clipped to the window.
    """
    lo, hi = frequency_window(modes.mode_freqs, spec.window_margin)
    rng = stream(spec.seed, "initial", trial)
    base = rng.uniform(lo, hi)
    jitter = rng.normal(0.0, 1.0, size=n_free(spec.n_segments, spec.symmetric))
    return np.clip(base + spec.initial_jitter * jitter, lo, hi)


def _levenberg_marquardt(resid, x0, iterations, bounds, record):
    """Projected Levenberg-Marquardt on a real residual vector.

    ``resid(x)`` returns ``(r, J)``. Damping is relative to diag(J^T J), so
    the iteration does not care about the overall scale of the residuals.
    """
    lo, hi = bounds
    x = np.clip(x0, lo, hi)
    r, jac = resid(x)
    f = float(r @ r)
    lam = 1e-3
    for it in range(iterations):
        record(it, x, f)
        if f == 0.0 or lam > 1e20:
            continue
        if not np.all(np.isfinite(jac)):
            raise OptimizationError("non-finite Jacobian")
        jtj = jac.T @ jac
        grad = jac.T @ r
        diag = np.diag(jtj).copy()
        diag[diag <= 0] = max(diag.max(), 1e-300)
        for _ in range(30):
            try:
                step = np.linalg.solve(jtj + lam * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            trial = np.clip(x + step, lo, hi)
            rt, jt = resid(trial)
            ft = float(rt @ rt)
            if ft < f:
                x, r, jac, f = trial, rt, jt, ft
                lam = max(lam / 3, 1e-12)
                break
            lam *= 4
    return x, f


class _Runner:
    """Everything shared between trials of one optimisation spec."""

    def __init__(self, spec, modes, pair, training=None):
        self.spec = spec
        self.modes = modes
        self.problem = GateProblem(modes, pair)
        template = make_pulse(spec, np.zeros(n_free(spec.n_segments, spec.symmetric)))
        self.lmap, _ = parameter_map(template)
        self.dt = spec.duration / self.lmap.shape[0]
        self.bounds = frequency_window(modes.mode_freqs, spec.window_margin)
        if training is not None:
            self.training = training if isinstance(training, SampleSet) else SampleSet(training)
        elif spec.method == "s_robust":
            self.training = sample_offsets(spec.uncertainty, modes.n_modes, spec.training_size,
                                           (spec.seed, "training"))
        self.evaluations = 0

    def fine(self, params):
        return self.lmap @ params

    def calibrated(self, params):
        return self.problem.calibrate(self.fine(params), self.dt)

    def run(self, trial, initial=None):
        spec = self.spec
        x0 = initial_guess(spec, self.modes, trial) if initial is None else np.asarray(initial, float)
        curve = []
        t_start = time.perf_counter()
        if spec.method in ("nonrobust", "robust"):
            params = self._run_descent(x0, curve)
        else:
            params = self._run_adam(x0, curve, trial)
        omega, sign = self.calibrated(params)
        pulse = make_pulse(spec, params, omega=omega, trial=trial, angle_sign=sign)
        return pulse, curve, time.perf_counter() - t_start

    def _run_descent(self, x0, curve):
        prob, dt = self.problem, self.dt
        robust = self.spec.method == "robust"
        weight = np.sqrt(prob.disp_weight)
        tau = self.spec.duration

        def resid(p):
            ints = mode_integrals(self.fine(p), dt, prob.mode_freqs, None, grad=True)
            if robust:
                val, d = ints.avg / tau, ints.d_avg / tau
            else:
                val, d = ints.disp, ints.d_disp
            self.evaluations += 1
            r = weight * val
            jac = (weight[:, None] * d) @ self.lmap
            return np.concatenate([r.real, r.imag]), np.vstack([jac.real, jac.imag])

        def record(it, p, val):
            try:
                omega = self.calibrated(p)[0]
            except CalibrationError:
                omega = float("nan")
            curve.append({"iter": it, "cost": val * omega**2, "omega_rad_s": omega,
                          "batch_seed": None})

        x, _ = _levenberg_marquardt(resid, x0, self.spec.iterations, self.bounds, record)
        return x

    def _run_adam(self, x0, curve, trial):
        spec, prob = self.spec, self.problem
        lo, hi = self.bounds
        x = np.clip(x0, lo, hi)
        state = AdamState.zeros(len(x))
        for it in range(spec.iterations):
            if spec.method == "s_robust":
                offsets, seed = self.training.offsets, None
            else:
                seed = [spec.seed, "batch", trial, it]
                offsets = sample_offsets(spec.uncertainty, self.modes.n_modes,
                                         spec.batch_size, tuple(seed)).offsets
            val, g, rep = prob.batch(self.fine(x), self.dt, offsets,
                                     displacement_only=spec.displacement_only)
            self.evaluations += len(offsets)
            curve.append({"iter": it, "cost": val, "omega_rad_s": rep.omega,
                          "batch_seed": seed})
            lr = spec.learning_rate * min(1.0, (it + 1) / spec.warmup) if spec.warmup else spec.learning_rate
            x, state = adam_step(x, g @ self.lmap, state, replace(AdamHyper(), lr=lr))
            x = np.clip(x, lo, hi)
        return x

    def cv_score(self, pulse, cv_offsets):
        """Mean gate error 1 - F over the cross-validation offsets."""
        fid = self.problem.fidelities(self.fine(_free(pulse)), self.dt, cv_offsets,
                                      pulse.omega, 0.5, pulse.meta.get("angle_sign"))
        return float(np.mean(1 - fid))


def _free(pulse):
    return parameter_map(pulse)[1]


def optimize(spec, modes, pair, trial=0, initial=None, training=None):
    """Single optimisation from a random (or given) initial pulse.

    ``training`` replaces the s-robust training set drawn from the seed.
    """
    runner = _Runner(spec, modes, pair, training)
    pulse, curve, wall = runner.run(trial, initial)
    res = TrialResult(pulse, float("nan"), curve, wall, (spec.seed, trial))
    return OptimizationRun(curve, [res], pulse, {"optimize": wall},
                           {"master": spec.seed, "trials": [trial]})


def multi_trial(spec, modes, pair, training=None):
    """Best of ``spec.trials`` optimisations, scored on a cross-validation set.

    The cross-validation offsets come from their own stream and never overlap
    training samples, minibatches or test sets.
    """
    runner = _Runner(spec, modes, pair, training)
    cv = sample_offsets(spec.uncertainty, modes.n_modes, spec.cv_size, (spec.seed, "cv"),
                        role="cross_validation")
    t0 = time.perf_counter()

    def one(trial):
        try:
            pulse, curve, wall = runner.run(trial)
            score = runner.cv_score(pulse, cv.offsets)
            return TrialResult(pulse, score, curve, wall, (spec.seed, trial))
        except (CalibrationError, OptimizationError, FloatingPointError) as exc:
            log.warning("trial %d failed: %s", trial, exc)
            return TrialResult(None, float("inf"), [], 0.0, (spec.seed, trial), str(exc))

    if spec.threads > 1:
        with ThreadPoolExecutor(spec.threads) as pool:
            results = list(pool.map(one, range(spec.trials)))
    else:
        results = [one(t) for t in range(spec.trials)]
    ok = [r for r in results if r.pulse is not None]
    if not ok:
        raise OptimizationError(
            "all trials failed: " + "; ".join(f"trial {i}: {r.error}" for i, r in enumerate(results))
        )
    # lowest score wins, ties to the lowest trial index
    best = min(range(len(results)), key=lambda i: (results[i].cv_score, i))
    sel = results[best]
    return OptimizationRun(
        sel.learning_curve, results, sel.pulse,
        {"total": time.perf_counter() - t0, "per_trial": [r.wall_time for r in results]},
        {"master": spec.seed, "trials": list(range(spec.trials)), "selected_trial": best,
         "cv": [spec.seed, "cv"]},
    )
