import numpy as np
import pytest

from gwpdyn.packet import make_packet_state
from gwpdyn.potentials import FieldModel, cosine_1d, quartic_rotational_2d

ACCEPTANCE_LINES: list[str] = []


def record_verdict(line: str) -> None:
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    # captured stdout is hidden for passing tests; repeat the acceptance
    # verdicts where they are always visible
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def cos_model():
    return cosine_1d()


@pytest.fixture
def quartic_model():
    return quartic_rotational_2d()


@pytest.fixture
def bench_state_1d():
    # standard 1D initial data: q=0.5, p=-1, A=0, B=1
    return make_packet_state([0.5], [-1.0], [[0.0]], [[1.0]])


@pytest.fixture
def bench_state_2d():
    return make_packet_state([1.0, 0.0], [0.0, 1.0],
                             [[-3.0, -6.0], [-6.0, -6.0]],
                             [[1.0, 0.5], [0.5, 1.0]])


def random_packet(rng, d, spread=0.8):
    """Random admissible packet state with well-conditioned B."""
    q = spread * rng.standard_normal(d)
    p = spread * rng.standard_normal(d)
    A = spread * rng.standard_normal((d, d))
    A = 0.5 * (A + A.T)
    W = rng.standard_normal((d, d))
    B = W @ W.T + np.eye(d)
    return make_packet_state(q, p, A, B)


def plane_wave_gauge_2d(mass: float = 1.3) -> FieldModel:
    """Synthetic 2D model with genuinely curved vector potential.

    A_k(x) = sin(c_k . x), V = cos(x1) cos(x2).  Unlike the bundled
    benchmark models this has nonzero hessA and a non-unit mass, so it
    exercises every term of the order-hbar momentum equation.
    """
    c = (np.array([1.0, 2.0]), np.array([-1.0, 1.0]))

    def V(x):
        x = np.asarray(x, dtype=float)
        return np.cos(x[..., 0]) * np.cos(x[..., 1])

    def gradV(x):
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack([-np.sin(x1) * np.cos(x2),
                         -np.cos(x1) * np.sin(x2)], axis=-1)

    def hessV(x):
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        vv = np.cos(x1) * np.cos(x2)
        ss = np.sin(x1) * np.sin(x2)
        return np.stack([np.stack([-vv, ss], axis=-1),
                         np.stack([ss, -vv], axis=-1)], axis=-2)

    def A(x):
        x = np.asarray(x, dtype=float)
        return np.stack([np.sin(x @ ck) for ck in c], axis=-1)

    def jacA(x):
        x = np.asarray(x, dtype=float)
        return np.stack([np.cos(x @ ck)[..., None] * ck for ck in c], axis=-2)

    def hessA(x, k):
        x = np.asarray(x, dtype=float)
        return -np.sin(float(x @ c[k])) * np.outer(c[k], c[k])

    def ghtV(x, M):
        x = np.asarray(x, dtype=float)
        M = np.asarray(M, dtype=float)
        x1, x2 = x[0], x[1]
        tr = M[0, 0] + M[1, 1]
        off = 2.0 * M[0, 1]
        return np.array([tr * np.sin(x1) * np.cos(x2) + off * np.cos(x1) * np.sin(x2),
                         tr * np.cos(x1) * np.sin(x2) + off * np.sin(x1) * np.cos(x2)])

    def ghtA(x, M, k):
        x = np.asarray(x, dtype=float)
        M = np.asarray(M, dtype=float)
        return -np.cos(float(x @ c[k])) * float(c[k] @ M @ c[k]) * c[k]

    return FieldModel(
        name="planewave2d", dim=2, mass=mass,
        V=V, gradV=gradV, hessV=hessV,
        A=A, jacA=jacA, hessA=hessA,
        grad_hess_trace_V=ghtV, grad_hess_trace_A=ghtA,
    )


@pytest.fixture
def curved_gauge_model():
    return plane_wave_gauge_2d()
