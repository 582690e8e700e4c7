import numpy as np
import pytest

from saccadic.signals import SynthEcgParams, synth_ecg


@pytest.fixture(scope="session")
def clean_ecg():
    """Ten noise-free, jitter-free beats of the default wave table."""
    return synth_ecg(SynthEcgParams(beats=10, noise_sigma=0.0, cycle_jitter_sigma=0.0, seed=1))


@pytest.fixture(scope="session")
def noisy_ecg():
    return synth_ecg(SynthEcgParams(beats=200, noise_sigma=0.02, cycle_jitter_sigma=0.0, seed=3))


def t_bump_window(center_offset=120, width=40, amplitude=0.3, sigma=40.0):
    """Oracle: the T Gaussian alone, sampled on the window centred ``center_offset`` after R."""
    i = np.arange(center_offset - width // 2, center_offset + width // 2)
    return amplitude * np.exp(-((i - 120) ** 2) / (2 * sigma ** 2))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
