from .dqn import DQNBrain, DQNParams, ReplayBuffer, dqn_select_action, dqn_td_targets, dqn_update, huber_loss
from .nn import AdamState, MLPSpec, adam_init, adam_update, grad, init_params, mlp_forward, value_and_grad
from .ppo import PPOBrain, PPOParams, RolloutBuffer, policy_sample, ppo_gae, ppo_loss, ppo_update

__all__ = [
    "AdamState", "DQNBrain", "DQNParams", "MLPSpec", "PPOBrain", "PPOParams",
    "ReplayBuffer", "RolloutBuffer", "adam_init", "adam_update", "dqn_select_action",
    "dqn_td_targets", "dqn_update", "grad", "huber_loss", "init_params", "mlp_forward",
    "policy_sample", "ppo_gae", "ppo_loss", "ppo_update", "value_and_grad",
]
