import numpy as np
import pytest

from streamgp.kernels import Dataset, Hyperparameters


def random_hp(rng, dim=2, ell=(0.15, 0.5), noise=(0.01, 0.2)):
    return Hyperparameters.from_values(
        rng.uniform(0.5, 2.0), rng.uniform(*ell, size=dim), rng.uniform(*noise)
    )


def random_data(rng, n, dim=2):
    X = rng.uniform(size=(n, dim))
    y = np.sin(3.0 * X[:, 0]) + np.cos(2.0 * X[:, -1]) + 0.1 * rng.standard_normal(n)
    return Dataset(X, y)


def as_flat(objective, hp, Z=None):
    """Wrap ``objective(hp, Z) -> Objective`` as ``vector -> (value, gradient)``."""
    n = hp.size

    def fun(v):
        h = Hyperparameters.from_vector(v[:n])
        z = v[n:].reshape(Z.shape) if Z is not None else None
        obj = objective(h, z)
        return obj.value, obj.gradient

    start = hp.to_vector() if Z is None else np.concatenate([hp.to_vector(), Z.ravel()])
    return fun, start


# acceptance verdict lines, repeated at the end of the run
VERDICTS = []


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
