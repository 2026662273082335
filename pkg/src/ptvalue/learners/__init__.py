"""TD/Q-learning baselines and the permanent/transient learners."""
from .loops import MetricsRecord, control_episode_loop, prediction_episode_loop, step_prediction_loop
from .policy import act_epsilon_greedy, greedy_action, random_action
from .pt import PTLearner, PTQLearner
from .td import QLearner, TDLearner, td_update

pt_td_episode_loop = prediction_episode_loop

__all__ = [
    "MetricsRecord",
    "PTLearner",
    "PTQLearner",
    "QLearner",
    "TDLearner",
    "act_epsilon_greedy",
    "control_episode_loop",
    "greedy_action",
    "prediction_episode_loop",
    "pt_td_episode_loop",
    "random_action",
    "step_prediction_loop",
    "td_update",
]
