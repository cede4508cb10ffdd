"""Brain checkpoints: flat parameters plus hyperparameters as versioned JSON."""
from dataclasses import asdict
import json

import numpy as np

from .dqn import DQNBrain, DQNParams
from .ppo import PPOBrain, PPOParams

FORMAT = "pricelab-brain"
VERSION = 1


def save_brain(brain, path):
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "algorithm": brain.algorithm,
        "hyperparams": asdict(brain.hp),
        "params": [float(x) for x in brain.params],
    }
    if brain.algorithm == "dqn":
        doc["sizes"] = list(brain.spec.sizes)
        doc["target_params"] = [float(x) for x in brain.target_params]
    else:
        doc["sizes"] = list(brain.pi_spec.sizes)
        doc["rollout_size"] = brain.rollout.size
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_brain(path, rng):
    """Rebuild a brain from ``path``; optimizer and buffers start empty."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != FORMAT:
        raise ValueError(f"{path}: not a brain checkpoint")
    if doc.get("version") != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {doc.get('version')!r}")
    sizes = doc["sizes"]
    obs_size, n_actions = sizes[0], sizes[-1]
    if doc["algorithm"] == "dqn":
        brain = DQNBrain(obs_size, n_actions, 1, rng, DQNParams(**doc["hyperparams"]))
        brain.target_params = np.asarray(doc["target_params"], dtype=np.float64)
    elif doc["algorithm"] == "ppo":
        brain = PPOBrain(obs_size, n_actions, doc["rollout_size"], rng, PPOParams(**doc["hyperparams"]))
    else:
        raise ValueError(f"{path}: unknown algorithm {doc['algorithm']!r}")
    params = np.asarray(doc["params"], dtype=np.float64)
    if params.shape != brain.params.shape:
        raise ValueError(f"{path}: parameter count {params.size} does not match layout")
    brain.params = params
    return brain
