"""Behavior cloning: supervised regression from observations to expert
actions over a demonstration set.

Actions are normalized to [-1, 1] per component before the MSE so speed and
steering contribute on equal footing; the returned policy is the epoch with
the lowest held-out test MSE.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import nn
from .demos import DemoSet, split
from .sim import Action, OBS_DIM, OMEGA_MAX, V_MAX

ACTOR_HIDDEN = (64, 64)


@dataclass(frozen=True)
class BcConfig:
    epochs: int = 50
    batch_size: int = 64
    learning_rate: float = 1e-3
    seed: int = 0
    train_fraction: float = 0.9
    hidden_sizes: tuple = ACTOR_HIDDEN

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def to_json_dict(self):
        return {"epochs": self.epochs, "batch_size": self.batch_size,
                "learning_rate": self.learning_rate, "seed": self.seed,
                "train_fraction": self.train_fraction,
                "hidden_sizes": list(self.hidden_sizes)}

    @classmethod
    def from_json_dict(cls, doc):
        doc = dict(doc)
        if "hidden_sizes" in doc:
            doc["hidden_sizes"] = tuple(doc["hidden_sizes"])
        return cls(**doc)


@dataclass
class Policy:
    spec: nn.MlpSpec
    params: nn.NetworkParams

    def save(self, path):
        nn.save_model(path, self.spec, self.params)

    @classmethod
    def load(cls, path):
        spec, params = nn.load_model(path)
        return cls(spec, params)


def actor_spec(hidden_sizes=ACTOR_HIDDEN) -> nn.MlpSpec:
    return nn.MlpSpec((OBS_DIM,) + tuple(hidden_sizes) + (2,),
                      output_activation="tanh")


def normalize_actions(actions):
    """Map (speed, steer) columns into [-1, 1] each."""
    a = np.asarray(actions, dtype=np.float64)
    out = np.empty_like(a)
    out[..., 0] = 2.0 * a[..., 0] / V_MAX - 1.0
    out[..., 1] = a[..., 1] / OMEGA_MAX
    return out


def denormalize_action(y) -> Action:
    speed = (float(y[0]) + 1.0) / 2.0 * V_MAX
    steer = float(y[1]) * OMEGA_MAX
    return Action(speed, steer).clamped()


def predict(policy: Policy, obs_vec) -> Action:
    y, _ = nn.forward(policy.spec, policy.params, np.asarray(obs_vec, dtype=np.float64))
    return denormalize_action(y)


def predict_normalized(policy: Policy, obs_batch):
    """Batch forward pass in normalized action space (used by training/eval)."""
    y, _ = nn.forward(policy.spec, policy.params, obs_batch)
    return y


def _mse(policy_spec, params, x, t):
    y, _ = nn.forward(policy_spec, params, x)
    return float(np.mean((y - t) ** 2))


def train_bc(demos: DemoSet, config: BcConfig = BcConfig()):
    """Train a policy on a DemoSet; returns (policy, report).

    ``report`` is a list of {"epoch", "train_mse", "test_mse"} dicts, one per
    epoch; the returned policy holds the parameters from the epoch with the
    lowest test MSE.
    """
    train_set, test_set = split(demos, config.train_fraction, config.seed)
    x_train = train_set.obs_matrix()
    t_train = normalize_actions(train_set.action_matrix())
    x_test = test_set.obs_matrix()
    t_test = normalize_actions(test_set.action_matrix())

    spec = actor_spec(config.hidden_sizes)
    params = nn.init_params(spec, config.seed)
    adam = nn.AdamState(params, config.learning_rate)
    shuffle_rng = np.random.default_rng(config.seed + 1)

    n = len(x_train)
    best_test = math.inf
    best_params = params.copy()
    report = []
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            xb, tb = x_train[idx], t_train[idx]
            y, tape = nn.forward(spec, params, xb)
            grad_out = 2.0 * (y - tb) / y.size
            grads, _ = nn.backward(spec, params, tape, grad_out)
            nn.adam_step(params, grads, adam)
        train_mse = _mse(spec, params, x_train, t_train)
        test_mse = _mse(spec, params, x_test, t_test)
        if not (math.isfinite(train_mse) and math.isfinite(test_mse)):
            raise nn.TrainingError(f"non-finite loss at epoch {epoch}")
        report.append({"epoch": epoch, "train_mse": train_mse, "test_mse": test_mse})
        if test_mse < best_test:
            best_test = test_mse
            best_params = params.copy()
    return Policy(spec, best_params), report
