"""scikit-learn style front end.

``X`` is always a 2-D array of mode-frequency offset vectors (rad/s), one row
per sample and one column per mode. ``fit`` designs a pulse; ``predict``
returns the gate fidelity at each offset row and ``score`` their mean.
"""
import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_offsets, check_pair, check_positive
from .evaluation import fidelities
from .modes import TrapConfig, transverse_modes
from .objectives import FidelityConfig
from .optimizer import METHODS, ObjectiveSpec, multi_trial, optimize

TWO_PI = 2 * np.pi


class FMPulseOptimizer(BaseEstimator):
    """Robust frequency-modulated MS gate design as an estimator.

    Parameters mirror :class:`fmforge.optimizer.ObjectiveSpec`. ``modes`` is
    a :class:`fmforge.modes.ModeStructure`; when ``None`` the default trap
    with ``n_ions`` ions is used. ``pair`` is 0-based.

    ``fit(X)`` with ``X`` given uses those offsets as the fixed training set
    and therefore requires ``method="s_robust"``; without ``X`` each method
    draws its own samples from ``seed``.
    """

    def __init__(self, method="b_robust", uncertainty=TWO_PI * 1e3, pulse_kind="discrete",
                 duration=200e-6, n_segments=None, iterations=None, trials=1, batch_size=10,
                 training_size=100, cv_size=200, learning_rate=TWO_PI * 200.0,
                 continuous_displacement_only=True, seed=0, n_ions=2, modes=None, pair=(0, 1),
                 nbar=0.5):
        self.method = method
        self.uncertainty = uncertainty
        self.pulse_kind = pulse_kind
        self.duration = duration
        self.n_segments = n_segments
        self.iterations = iterations
        self.trials = trials
        self.batch_size = batch_size
        self.training_size = training_size
        self.cv_size = cv_size
        self.learning_rate = learning_rate
        self.continuous_displacement_only = continuous_displacement_only
        self.seed = seed
        self.n_ions = n_ions
        self.modes = modes
        self.pair = pair
        self.nbar = nbar

    def _spec(self, training_size=None):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        check_positive(self.uncertainty, "uncertainty", allow_zero=True)
        check_positive(self.duration, "duration")
        check_positive(self.trials, "trials", integer=True)
        return ObjectiveSpec(
            method=self.method, uncertainty=float(self.uncertainty), pulse_kind=self.pulse_kind,
            duration=float(self.duration), n_segments=self.n_segments,
            iterations=self.iterations, trials=self.trials, batch_size=self.batch_size,
            training_size=training_size or self.training_size, cv_size=self.cv_size,
            learning_rate=float(self.learning_rate),
            continuous_displacement_only=self.continuous_displacement_only, seed=self.seed,
        )

    def fit(self, X=None, y=None):
        modes = self.modes if self.modes is not None else transverse_modes(TrapConfig(self.n_ions))
        pair = check_pair(self.pair, modes.n_ions)
        training = None
        if X is not None:
            if self.method != "s_robust":
                raise ValueError("training offsets X are only used by method='s_robust'")
            training = check_offsets(X, modes.n_modes)
        spec = self._spec(None if training is None else len(training))
        if spec.trials > 1:
            run = multi_trial(spec, modes, pair, training)
        else:
            run = optimize(spec, modes, pair, training=training)
        self.modes_ = modes
        self.pair_ = pair
        self.run_ = run
        self.pulse_ = run.selected
        self.omega_ = run.selected.omega
        self.learning_curve_ = run.costs
        self.n_features_in_ = modes.n_modes
        return self

    def predict(self, X):
        """Fidelity F(eps) for each offset row of ``X``."""
        check_is_fitted(self, "pulse_")
        X = check_offsets(X, self.n_features_in_)
        return fidelities(self.pulse_, self.modes_, self.pair_, X, FidelityConfig(self.nbar))

    def score(self, X, y=None):
        """Mean fidelity over the rows of ``X``."""
        return float(np.mean(self.predict(X)))
