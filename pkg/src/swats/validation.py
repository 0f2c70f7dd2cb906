"""Input checks shared by the estimators and the harness."""

from __future__ import annotations

from .model import Realization, Scenario, validate_scenario


class ScenarioError(ValueError):
    """Raised when a scenario or config fails validation; carries every violation."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def check_scenario(s) -> Scenario:
    if not isinstance(s, Scenario):
        raise TypeError(f"expected a Scenario, got {type(s).__name__}")
    problems = validate_scenario(s)
    if problems:
        raise ScenarioError(problems)
    return s


def check_realization(s: Scenario, real) -> Realization:
    if not isinstance(real, Realization):
        raise TypeError(f"expected a Realization, got {type(real).__name__}")
    if len(real.f) != s.cloud.n or len(real.t) != len(s.cloud.edges):
        raise ValueError(
            f"realization shape ({len(real.f)} vehicles, {len(real.t)} edges) does not match "
            f"scenario ({s.cloud.n} vehicles, {len(s.cloud.edges)} edges)"
        )
    return real
