from __future__ import annotations
from typing import Dict, Protocol

from processing.sim_world import Action, WorldState


class Controller(Protocol):
    name: str
    # True when the controller keeps every label exactly at its home offset
    pins_home: bool

    def actions(self, world: WorldState) -> Dict[str, Action]:
        """
        Return one action per active label, keyed by target id.
        Implementations must not modify the world.
        """
        ...
