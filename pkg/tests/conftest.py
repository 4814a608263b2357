import dataclasses

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dygraft import SbmConfig, Snapshot, generate_evolving_sbm

settings.register_profile(
    "default", deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])
settings.load_profile("default")


def make_snapshot(node_count, edges, features=None, timestamp=0.0, labels=None,
                  class_count=2):
    if features is None:
        rng = np.random.default_rng(node_count * 977 + len(edges))
        features = rng.standard_normal((node_count, 3))
    return Snapshot(node_count=node_count, edges=np.asarray(edges, dtype=np.int64).reshape(-1, 2),
                    features=np.asarray(features, dtype=np.float64),
                    timestamp=timestamp, labels=labels or {})


def random_snapshot(rng, node_count=None, feature_dim=3, edge_p=0.3):
    n = node_count if node_count is not None else int(rng.integers(2, 9))
    edges = [(u, v) for u in range(n) for v in range(u + 1, n)
             if rng.random() < edge_p]
    return make_snapshot(n, edges if edges else np.empty((0, 2), dtype=np.int64),
                         features=rng.standard_normal((n, feature_dim)))


@pytest.fixture(scope="session")
def tiny_pair():
    """10-node, T=2 toy pair shared by shape and gradient tests."""
    src = SbmConfig(block_count=2, nodes_per_block=5, T=2, few_shot_k=2,
                    intra_p=0.6, inter_p=0.1, feature_dim=3)
    tgt = dataclasses.replace(src, feature_center_shift=0.5)
    return generate_evolving_sbm(src, tgt, seed=7)
