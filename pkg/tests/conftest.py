import numpy as np
import pytest

from spca.numkit import orthonormalize


def random_feasible(rng, m, n, r):
    """Random orthonormal U (m x r) and unit-column V (r x n)."""
    u = orthonormalize(rng.standard_normal((m, r)))
    v = rng.standard_normal((r, n))
    v /= np.linalg.norm(v, axis=0)
    return u, v


def random_orthonormal_batch(rng, count, m, r):
    """``count`` random m x r matrices with orthonormal columns (batched QR)."""
    q, _ = np.linalg.qr(rng.standard_normal((count, m, r)))
    return q


def jacobi_eigenvalues(a, sweeps=100, tol=1e-15):
    """Cyclic Jacobi eigenvalues of a symmetric matrix, descending."""
    a = np.array(a, dtype=float)
    n = a.shape[0]
    for _ in range(sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off <= tol * max(1.0, np.linalg.norm(a)):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if a[p, q] == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
    return np.sort(np.diag(a))[::-1]


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


# --- acceptance reporting: one PASS/FAIL line per criterion ------------------

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(num, title): acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    crit = getattr(report, "_criterion", None)
    if crit is not None:
        num, title = crit
        prev = _criteria.get(num, (title, True))
        _criteria[num] = (title, prev[1] and report.passed)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        report._criterion = tuple(marker.args)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        title, ok = _criteria[num]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {title}")
