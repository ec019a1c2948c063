#!/usr/bin/env python3
"""
Curriculum - Number of simultaneously controlled labels as a function of training progress
"""
import logging
from dataclasses import dataclass
from typing import List

from errors import ConfigError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CurriculumSchedule:
    start: int = 2
    end: int = 2
    step_size: int = 2
    total_steps: int = 300_000

    def __post_init__(self):
        if self.start <= 0 or self.end < self.start:
            raise ConfigError(f"curriculum needs 0 < start <= end (got {self.start}, {self.end})")
        if self.step_size <= 0 or (self.end - self.start) % self.step_size:
            raise ConfigError(f"step_size {self.step_size} must divide end - start = {self.end - self.start}")
        if self.total_steps <= 0:
            raise ConfigError(f"total_steps must be positive (got {self.total_steps})")

    @property
    def stages(self) -> int:
        return (self.end - self.start) // self.step_size + 1

    @property
    def stage_length(self) -> float:
        return self.total_steps / self.stages

    def stage_of(self, global_step: int) -> int:
        return min(self.stages - 1, int(global_step // self.stage_length))

    def num_agent(self, global_step: int) -> int:
        return min(self.end, self.start + self.step_size * self.stage_of(global_step))

    def boundaries(self) -> List[int]:
        """First global step of every stage"""
        return [int(round(k * self.stage_length)) for k in range(self.stages)]


def advance_curriculum(schedule: CurriculumSchedule, global_step: int) -> int:
    return schedule.num_agent(global_step)
