#!/usr/bin/env python3
"""
Controller Registry - Manages available label controllers
"""
import logging
from typing import Any, Dict, List, Optional

logger = logging.getLogger(__name__)


class ControllerRegistry:
    """Registry for managing controllers"""

    def __init__(self):
        self._controllers: Dict[str, Any] = {}

    def register(self, controller_class) -> None:
        """Register a controller class under its ``name`` attribute"""
        name = getattr(controller_class, "name", None) or controller_class.__name__
        if name in self._controllers:
            logger.warning(f"Controller {name} registered twice; keeping the latest")
        self._controllers[name] = controller_class
        logger.debug(f"Registered controller: {name}")

    def get_controller_by_name(self, name: str, **kwargs):
        """Get a controller instance by name, or None if unknown"""
        if name in self._controllers:
            return self._controllers[name](**kwargs)
        return None

    def list_controller_names(self) -> List[str]:
        return list(self._controllers.keys())

    def needs_checkpoint(self, name: str) -> bool:
        return bool(getattr(self._controllers.get(name), "needs_policy", False))


# Global registry instance
_registry = ControllerRegistry()


def register(controller_class) -> None:
    _registry.register(controller_class)


def get_controller_by_name(name: str, **kwargs):
    return _registry.get_controller_by_name(name, **kwargs)


def list_controller_names() -> List[str]:
    return _registry.list_controller_names()


def needs_checkpoint(name: str) -> bool:
    return _registry.needs_checkpoint(name)


def _auto_register():
    """Register the built-in controllers"""
    from controllers.baselines import ForceController, NoneController
    from controllers.policy_controller import PolicyController

    register(NoneController)
    register(ForceController)
    register(PolicyController)


_auto_register()
