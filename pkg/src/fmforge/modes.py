"""Equilibrium positions and transverse normal modes of a linear ion chain."""
from dataclasses import dataclass, field

import numpy as np
import scipy.constants as const

TWO_PI = 2 * np.pi

YB171_MASS = 170.936 * const.atomic_mass
RAMAN_355_WAVEVECTOR = np.sqrt(2) * TWO_PI / 355e-9
DEFAULT_TRANSVERSE_FREQ = TWO_PI * 2.1e6
DEFAULT_AXIAL_FREQ = TWO_PI * 0.4e6


class ModeError(ValueError):
    """Raised for unphysical trap configurations or solver failures."""


def default_axial_freq(n_ions):
    """Axial frequency used when a config leaves it unset.

    Constant up to six ions, then reduced by sqrt(6/N) so longer chains stay
    linear.
    """
    if n_ions <= 6:
        return DEFAULT_AXIAL_FREQ
    return DEFAULT_AXIAL_FREQ * np.sqrt(6.0 / n_ions)


@dataclass(frozen=True)
class TrapConfig:
    """Harmonic trap holding ``n_ions`` ions. Frequencies are in rad/s."""

    n_ions: int
    axial_freq: float = None
    transverse_freq: float = DEFAULT_TRANSVERSE_FREQ
    ion_mass: float = YB171_MASS
    laser_wavevector: float = RAMAN_355_WAVEVECTOR

    def __post_init__(self):
        if self.axial_freq is None:
            object.__setattr__(self, "axial_freq", float(default_axial_freq(self.n_ions)))
        if int(self.n_ions) != self.n_ions or self.n_ions < 2:
            raise ModeError(f"n_ions must be an integer >= 2, got {self.n_ions!r}")
        if not 0 < self.axial_freq < self.transverse_freq:
            raise ModeError(
                "need 0 < axial_freq < transverse_freq, got "
                f"{self.axial_freq!r}, {self.transverse_freq!r}"
            )
        if self.ion_mass <= 0 or self.laser_wavevector <= 0:
            raise ModeError("ion_mass and laser_wavevector must be positive")

    @property
    def length_scale(self):
        """Coulomb length (e^2 / 4 pi eps0 M w_z^2)^(1/3) in metres."""
        k = const.e**2 / (4 * np.pi * const.epsilon_0)
        return (k / (self.ion_mass * self.axial_freq**2)) ** (1.0 / 3.0)


@dataclass(frozen=True, eq=False)
class ModeStructure:
    """Transverse modes sorted by descending frequency (index 0 is c.m.).

    ``mode_vectors[k, j]`` is the participation of ion ``j`` in mode ``k`` and
    ``lamb_dicke[k, j]`` the matching Lamb-Dicke parameter.
    """

    mode_freqs: np.ndarray
    mode_vectors: np.ndarray
    lamb_dicke: np.ndarray
    positions: np.ndarray = field(default=None, repr=False)

    @property
    def n_modes(self):
        return len(self.mode_freqs)

    @property
    def n_ions(self):
        return self.mode_vectors.shape[1]


def _coulomb_force(u):
    diff = u[:, None] - u[None, :]
    np.fill_diagonal(diff, np.inf)
    return -u + np.sum(np.sign(diff) / diff**2, axis=1)


def _force_jacobian(u):
    diff = np.abs(u[:, None] - u[None, :])
    np.fill_diagonal(diff, np.inf)
    jac = 2.0 / diff**3
    np.fill_diagonal(jac, -1.0 - jac.sum(axis=1))
    return jac


def equilibrium_positions(trap, tol=1e-13, max_iter=200):
    """Dimensionless axial equilibrium positions, ascending.

    Solves ``u_i = sum_{j != i} sign(u_i - u_j) / (u_i - u_j)**2`` by damped
    Newton iteration from a uniformly spaced seed.
    """
    n = trap.n_ions if isinstance(trap, TrapConfig) else int(trap)
    if n < 2:
        raise ModeError("need at least two ions")
    u = np.linspace(-1.0, 1.0, n) * (n**0.56 if n > 2 else 0.63)
    for _ in range(max_iter):
        f = _coulomb_force(u)
        res = np.max(np.abs(f))
        if res < tol:
            break
        step = np.linalg.solve(_force_jacobian(u), -f)
        lam = 1.0
        while lam > 1e-6:
            trial = u + lam * step
            if np.all(np.diff(trial) > 0) and np.max(np.abs(_coulomb_force(trial))) < res:
                break
            lam *= 0.5
        else:
            if res < 1e-12:
                # rounding floor reached
                break
        u = trial
    else:
        raise ModeError(f"equilibrium solver did not converge for {n} ions")
    u = 0.5 * (u - u[::-1])
    return u


def transverse_matrix(trap, positions=None):
    """Transverse Hessian in units of the axial frequency squared."""
    u = equilibrium_positions(trap) if positions is None else positions
    beta2 = (trap.transverse_freq / trap.axial_freq) ** 2
    diff = np.abs(u[:, None] - u[None, :])
    np.fill_diagonal(diff, np.inf)
    coupling = 1.0 / diff**3
    a = coupling.copy()
    np.fill_diagonal(a, beta2 - coupling.sum(axis=1))
    return a


def _fix_signs(vectors):
    vectors = vectors.copy()
    for row in vectors:
        idx = np.flatnonzero(np.abs(row) > 1e-9)[0]
        if row[idx] < 0:
            row *= -1
    return vectors


def lamb_dicke_matrix(modes, trap):
    """eta[k, j] = dk * sqrt(hbar / (2 M w_k)) * b[k, j]."""
    scale = trap.laser_wavevector * np.sqrt(
        const.hbar / (2 * trap.ion_mass * np.asarray(modes.mode_freqs))
    )
    return scale[:, None] * np.asarray(modes.mode_vectors)


def transverse_modes(trap):
    """Solve for the transverse modes of ``trap``.

    Raises :class:`ModeError` when any eigenvalue is non-positive (the chain
    is past the zig-zag transition).
    """
    u = equilibrium_positions(trap)
    a = transverse_matrix(trap, u)
    evals, evecs = np.linalg.eigh(a)
    if np.any(evals <= 0):
        raise ModeError(
            f"non-positive transverse eigenvalue {evals.min():.4g}: "
            "trap is beyond the zig-zag transition"
        )
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    vectors = _fix_signs(evecs[:, order].T)
    freqs = trap.axial_freq * np.sqrt(evals)
    # the c.m. eigenvalue is beta^2 up to rounding; pin it
    if np.allclose(np.abs(vectors[0]), 1 / np.sqrt(trap.n_ions), atol=1e-9):
        freqs[0] = trap.transverse_freq
    partial = ModeStructure(freqs, vectors, np.zeros_like(vectors), u)
    eta = lamb_dicke_matrix(partial, trap)
    return ModeStructure(freqs, vectors, eta, u)


def custom_modes(mode_freqs, lamb_dicke):
    """Build a :class:`ModeStructure` from explicit frequencies and couplings."""
    freqs = np.asarray(mode_freqs, dtype=float)
    eta = np.atleast_2d(np.asarray(lamb_dicke, dtype=float))
    if eta.shape[0] != len(freqs):
        raise ModeError("lamb_dicke must have one row per mode")
    norms = np.linalg.norm(eta, axis=1, keepdims=True)
    vectors = np.divide(eta, norms, out=np.zeros_like(eta), where=norms > 0)
    return ModeStructure(freqs, vectors, eta)
