"""Common solver interface.

Solvers follow the scikit-learn estimator convention: every constructor
argument is a hyperparameter, ``get_params``/``set_params`` expose them
by introspecting ``__init__``, and ``solve(instance)`` plays the role of
``predict``.  The trainable agent additionally implements ``fit``.
"""

from __future__ import annotations

import inspect
from dataclasses import dataclass, field

from ..problem import ObjectiveValues, ProblemInstance, Schedule


@dataclass
class SolveResult:
    schedule: Schedule
    objectives: ObjectiveValues
    scalarized: float
    wall_s: float
    info: dict = field(default_factory=dict)


class BaseSolver:
    """Mixin providing sklearn-style parameter handling."""

    @classmethod
    def _param_names(cls) -> list[str]:
        sig = inspect.signature(cls.__init__)
        return [
            name
            for name, p in sig.parameters.items()
            if name != "self" and p.kind not in (p.VAR_POSITIONAL, p.VAR_KEYWORD)
        ]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params) -> "BaseSolver":
        valid = set(self._param_names())
        for key, value in params.items():
            if key not in valid:
                raise ValueError(f"invalid parameter {key!r} for {type(self).__name__}")
            setattr(self, key, value)
        return self

    def solve(self, inst: ProblemInstance) -> SolveResult:
        raise NotImplementedError

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"
