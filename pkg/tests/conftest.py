import numpy as np
import pytest

from movable_mimo.channel import ScatteringConfig, sample_spreading, synthesize_channel


def random_hermitian(rng, n, scale=1.0):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * 0.5 * (A + A.conj().T)


def random_psd(rng, n, trace=1.0):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Q = A @ A.conj().T
    return Q * (trace / np.trace(Q).real)


def random_realization(rng, N=4, M=4, cfg=None):
    cfg = cfg or ScatteringConfig()
    ps = sample_spreading(cfg, rng)
    t = rng.uniform(-1.5, 1.5, size=(N, 2))
    r = rng.uniform(-1.5, 1.5, size=(M, 2))
    return synthesize_channel(ps, t, r), t, r


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# criterion number -> (title, "PASS" | "FAIL", detail); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        title, status, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"[{status}] {num}. {title}: {detail}")
