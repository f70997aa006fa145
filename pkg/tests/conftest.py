import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fmforge.modes import TrapConfig, custom_modes, transverse_modes  # noqa: E402
from fmforge.pulses import ContinuousPulse, DiscretePulse, frequency_window  # noqa: E402

TWO_PI = 2 * np.pi


@pytest.fixture(scope="session")
def modes2():
    return transverse_modes(TrapConfig(2))


@pytest.fixture(scope="session")
def modes4():
    return transverse_modes(TrapConfig(4))


def random_modes(rng, n):
    freqs = np.sort(TWO_PI * (2.1e6 - rng.uniform(0, 2e5, n)))[::-1]
    eta = rng.normal(0, 0.05, (n, n))
    return custom_modes(freqs, eta)


def random_pulse(rng, modes, n_seg=16, kind="discrete", duration=200e-6, substeps=4,
                 symmetric=False):
    lo, hi = frequency_window(modes.mode_freqs)
    freqs = rng.uniform(lo, hi, n_seg)
    if symmetric:
        freqs = 0.5 * (freqs + freqs[::-1])
    if kind == "discrete":
        return DiscretePulse(freqs, duration, symmetric=symmetric)
    return ContinuousPulse(freqs, duration, substeps=substeps, symmetric=symmetric)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
