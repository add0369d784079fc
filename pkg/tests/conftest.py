import numpy as np
import pytest

from skyplan.access import UserDemand


def random_access_instance(rng: np.random.Generator, n_users: int):
    """One random multi-access instance with realistic magnitudes.

    Gains span several orders of magnitude; rates stay within a couple
    of bandwidths per user so subset rate sums remain representable.
    """
    bandwidth = float(10 ** rng.uniform(5, 7))
    noise_density = float(10 ** rng.uniform(-18, -15))
    users = [
        UserDemand(
            gain=float(10 ** rng.uniform(-12, -6)),
            rate=float(bandwidth * rng.uniform(0.01, 2.5)),
        )
        for _ in range(n_users)
    ]
    return users, bandwidth, noise_density


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
