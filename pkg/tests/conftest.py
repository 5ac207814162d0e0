import numpy as np
import pytest

from cfsecure.channel import PilotConfig, lmmse_stats
from cfsecure.cli import RunConfig, normalize_powers
from cfsecure.network import DeploymentConfig, deploy
from cfsecure.rates import PowerAllocation

P_T, P_P = normalize_powers(RunConfig())


def make_instance(m, k, j, seed, area=1000.0):
    cfg = DeploymentConfig(area_side_m=area, num_aps=m, num_users=k, num_eves=j)
    net = deploy(cfg, np.random.default_rng(seed))
    pilots = PilotConfig(tau_p=k, p_p=P_P)
    return net, pilots, lmmse_stats(net, pilots)


def random_feasible(stats, rng, p_t=P_T):
    """Random point of the budget polytope: each AP spends a random share, split at random."""
    m, k = stats.gamma.shape
    share = rng.dirichlet(np.ones(k + 1), size=m) * rng.uniform(0, 1, (m, 1))
    return PowerAllocation(share[:, :k] * p_t / stats.gamma, share[:, k] * p_t)


@pytest.fixture
def small_instance():
    return make_instance(8, 2, 1, seed=7)
