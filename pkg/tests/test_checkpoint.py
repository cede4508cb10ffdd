import json

import numpy as np
import pytest

from pricelab.learn.checkpoint import load_brain, save_brain
from pricelab.learn.dqn import DQNBrain, DQNParams
from pricelab.learn.ppo import PPOBrain, PPOParams


@pytest.mark.parametrize("make", [
    lambda rng: DQNBrain(4, 7, 100, rng, DQNParams(lr=3e-4, hidden_sizes=(16, 8))),
    lambda rng: PPOBrain(2, 7, 64, rng, PPOParams(ent_coef=0.02)),
])
def test_round_trip(make, tmp_path, rng):
    brain = make(rng)
    path = tmp_path / "b.json"
    save_brain(brain, path)
    doc = json.loads(path.read_text())
    assert doc["version"] == 1 and doc["algorithm"] == brain.algorithm
    back = load_brain(path, np.random.default_rng(0))
    assert np.array_equal(back.params, brain.params)
    assert back.hp == brain.hp
    if brain.algorithm == "dqn":
        assert np.array_equal(back.target_params, brain.target_params)
    obs = np.linspace(0, 1, 4 if brain.algorithm == "dqn" else 2)
    out = back.q_values(obs) if brain.algorithm == "dqn" else back.logits(obs)
    ref = brain.q_values(obs) if brain.algorithm == "dqn" else brain.logits(obs)
    assert np.array_equal(out, ref)


def test_rejects_bad_version(tmp_path, rng):
    path = tmp_path / "b.json"
    save_brain(PPOBrain(2, 3, 4, rng), path)
    doc = json.loads(path.read_text())
    doc["version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(ValueError, match="version"):
        load_brain(path, rng)
