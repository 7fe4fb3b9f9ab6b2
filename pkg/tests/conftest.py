"""Shared test helpers."""

import numpy as np

# One line per acceptance criterion check, appended by tests/test_acceptance.py
# and echoed after the run so the verdicts are visible even when tests pass.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria:")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


def central_diff_jacobian(f, x, scale=None):
    """Central finite-difference Jacobian of f at x.

    Step per coordinate is sqrt(eps) * max(1, |x_i|) unless scale overrides
    the max(1, |x_i|) factor.
    """
    x = np.asarray(x, dtype=np.float64)
    fx = np.asarray(f(x), dtype=np.float64)
    d_out = fx.shape[0]
    d_in = x.shape[0]
    J = np.empty((d_out, d_in))
    root_eps = np.sqrt(np.finfo(np.float64).eps)
    for j in range(d_in):
        hj = root_eps * (scale if scale is not None else max(1.0, abs(x[j])))
        xp = x.copy()
        xm = x.copy()
        xp[j] += hj
        xm[j] -= hj
        J[:, j] = (np.asarray(f(xp)) - np.asarray(f(xm))) / (2.0 * hj)
    return J
