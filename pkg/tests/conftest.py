import os
import sys

import numpy as np
import pytest
import torch

sys.path.insert(0, os.path.dirname(__file__))

torch.set_num_threads(1)


@pytest.fixture(autouse=True)
def _seed_everything():
    np.random.seed(0)
    torch.manual_seed(0)
    yield


@pytest.fixture
def out_root(tmp_path, monkeypatch):
    monkeypatch.setenv("TNET_OUTPUT_ROOT", str(tmp_path))
    return tmp_path


def overfit_config(out_dir, **changes):
    """Four 64x64 synthetic scenes, tiny backbone, 200 Adam steps."""
    from tnet.config import RunConfig

    base = dict(
        backbone="tiny", pretrained=False, decoder_width=32, input_size=64,
        epochs=200, batch_size=4, lr=1e-3, lr_decay_every=0, augment=False,
        synthetic_train=4, synthetic_seed=0, seed=0, max_steps=200,
        val_every=1000, checkpoint_every=1000, out_dir=str(out_dir),
    )
    base.update(changes)
    return RunConfig(**base)


@pytest.fixture(scope="session")
def overfit_run(tmp_path_factory):
    from tnet.train import train

    out = tmp_path_factory.mktemp("overfit")
    model, history = train(overfit_config(out), log=lambda *_: None)
    return model, history, out


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    return request.config.stash.setdefault(ACCEPTANCE_KEY, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
