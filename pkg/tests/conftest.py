import numpy as np

import photonstat as ps

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_square_spec(rng):
    """One draw from the randomized validation suite.

    Pulse widths log-uniform over [0.05, 5], photon numbers uniform over
    [0, 100]; half the draws are single-line (with a few detunings), half
    two-line with ratios from {0.01, 0.1, 0.5, 1}.
    """
    T = float(np.exp(rng.uniform(np.log(0.05), np.log(5.0))))
    N = float(rng.uniform(0.0, 100.0))
    if rng.random() < 0.5:
        delta = float(rng.choice([0.0, 0.0, 0.5, -0.5, 2.0, -2.0]))
        topology = ps.SingleLine(delta=delta)
    else:
        a = float(rng.choice([0.01, 0.1, 0.5, 1.0]))
        topology = ps.TwoLine(a=a)
    return ps.DriveSpec(ps.SquarePulse(T=T, N=N), topology)


def random_density(rng):
    """Random 2x2 density matrix (Hermitian, unit trace, PSD)."""
    m = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    rho = m @ m.conj().T
    return rho / rho.trace()
