"""Prediction and control environments plus the task-schedule machinery."""
from .control import ControlGrid, control_tasks, default_control_schedule
from .families import BASE_TRANSITION, epsilon_task_family, normalized_base_transition
from .grids import ContinuousGrid, DiscreteGrid, default_prediction_schedule, prediction_tasks
from .schedule import GridTask, ScheduleClock, TaskSchedule, Transition, schedule_step


def discrete_grid(schedule=None):
    return DiscreteGrid(schedule)


def continuous_grid(schedule=None, rng_seed=None):
    return ContinuousGrid(schedule, rng_seed)


def control_grid(schedule=None, rng_seed=None, **kwargs):
    return ControlGrid(schedule, rng_seed, **kwargs)


__all__ = [
    "BASE_TRANSITION",
    "ContinuousGrid",
    "ControlGrid",
    "DiscreteGrid",
    "GridTask",
    "ScheduleClock",
    "TaskSchedule",
    "Transition",
    "continuous_grid",
    "control_grid",
    "control_tasks",
    "default_control_schedule",
    "default_prediction_schedule",
    "discrete_grid",
    "epsilon_task_family",
    "normalized_base_transition",
    "prediction_tasks",
    "schedule_step",
]
