import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from epidiff.model import Parameters

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

unit = st.floats(0.0, 1.0)
rate = st.floats(0.01, 1.0)


@st.composite
def parameter_sets(draw, beta=None):
    mu = draw(st.floats(1e-5, 1e-2))
    population = draw(st.floats(1e3, 1e8))
    return Parameters(
        lambda_rec=mu * population,
        mu=mu,
        beta=draw(st.floats(0.01, 2.0)) if beta is None else beta,
        eta=draw(unit),
        phi1=draw(unit),
        phi2=draw(unit),
        c1=draw(st.floats(0.0, 1.0)),
        c2=draw(st.floats(0.0, 1.0)),
        r1=draw(unit),
        p=draw(unit),
        a1=draw(unit),
        gamma=draw(rate),
        sigma=draw(rate),
        theta=draw(rate),
        delta=draw(st.floats(0.0, 0.1)),
    )


def random_parameters(rng: np.random.Generator, n: int) -> list[Parameters]:
    """Seeded draws for the fixed-count checks of the acceptance suite."""
    out = []
    for _ in range(n):
        mu = 10 ** rng.uniform(-5, -2)
        out.append(
            Parameters(
                lambda_rec=mu * 10 ** rng.uniform(3, 8),
                mu=mu,
                beta=rng.uniform(0.01, 2.0),
                eta=rng.uniform(),
                phi1=rng.uniform(),
                phi2=rng.uniform(),
                c1=rng.uniform(),
                c2=rng.uniform(),
                r1=rng.uniform(),
                p=rng.uniform(),
                a1=rng.uniform(),
                gamma=rng.uniform(0.01, 1.0),
                sigma=rng.uniform(0.01, 1.0),
                theta=rng.uniform(0.01, 1.0),
                delta=rng.uniform(0.0, 0.1),
            )
        )
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


# criterion number -> list of (part, passed, detail); filled by the acceptance suite
ACCEPTANCE: dict = {}


def record(criterion: int, part: str, passed: bool, detail: str) -> bool:
    ACCEPTANCE.setdefault(criterion, []).append((part, bool(passed), detail))
    line = f"criterion {criterion} [{part}]: {'PASS' if passed else 'FAIL'} ({detail})"
    print(line)
    return bool(passed)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[number]
        verdict = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        details = "; ".join(f"{name}: {'ok' if ok else 'FAILED'} {info}" for name, ok, info in parts)
        terminalreporter.write_line(f"criterion {number}: {verdict} | {details}")
