"""Scenario engine over a trained model and the SAP 10.2 score relations."""

from .formulas import (EI_INVERSE_BREAK, SAP_INVERSE_BREAK, cost_from_sap, eco2_from_ei, ei_from_eco2,
                       energy_cost_factor, sap_from_cost)
from .scenario import (SCENARIO_NAMES, ScenarioResult, ScenarioSpec, apply_scenario, compare_scenarios,
                       evaluate_scenario)
