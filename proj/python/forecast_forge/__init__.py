"""Python access to the forecast curriculum core."""

from ._core import ForecastError, Workspace, run

ACTIONS = ("rf", "rb", "rotl", "rotr", "ef")

__all__ = ["ACTIONS", "ForecastError", "Workspace", "run"]
