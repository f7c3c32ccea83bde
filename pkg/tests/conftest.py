import dataclasses

import pytest

from aircap_arena.config import default_config


@pytest.fixture(scope="session")
def config():
    return default_config()


@pytest.fixture()
def small_config():
    """Short episodes and few workers for fast training-path tests."""
    cfg = default_config()
    return dataclasses.replace(
        cfg,
        world=dataclasses.replace(cfg.world, t_episode=16),
        train=dataclasses.replace(cfg.train, workers=2, minibatch_size=16,
                                  iterations=2, checkpoint_every=0),
    )
