from .adam import AdamState, adam_step
from .schedule import LrSchedule, lr_at

__all__ = ["AdamState", "adam_step", "LrSchedule", "lr_at"]
