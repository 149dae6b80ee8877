"""SAP 10.2 relations between scores, annual cost and equivalent CO2.

The forward relations are piecewise in the normalized cost (ECF) and
carbon (CF) factors. Their inverses switch branch at the linear branch's
value of the breakpoint, so cost -> score -> cost is exact on both
branches. Scores are clamped to [1, 100]."""

import numpy as np

from ..errors import OutOfRange

FLOOR_AREA_OFFSET = 45.0

SAP_BREAK = 3.5          # ECF
SAP_LINEAR = (100.0, 16.21)
SAP_LOG = (108.8, 120.5)
SAP_INVERSE_BREAK = SAP_LINEAR[0] - SAP_LINEAR[1] * SAP_BREAK   # 43.265

EI_BREAK = 28.3          # CF
EI_LINEAR = (100.0, 1.34)
EI_LOG = (200.0, 95.0)
EI_INVERSE_BREAK = EI_LINEAR[0] - EI_LINEAR[1] * EI_BREAK       # 62.078

SCORE_MIN, SCORE_MAX = 1.0, 100.0
BRANCH_TOL = 1e-9


def _as_array(name: str, value, positive: bool = True):
    array = np.asarray(value, dtype=np.float64)
    if not np.all(np.isfinite(array)):
        raise OutOfRange(f"{name} must be finite")
    if positive and np.any(array <= 0):
        raise OutOfRange(f"{name} must be positive", value=np.min(array).item())
    return array


def _out(array: np.ndarray):
    return float(array) if array.ndim == 0 else array


def _score(factor: np.ndarray, brk: float, linear, log) -> np.ndarray:
    use_log = factor >= brk + BRANCH_TOL
    safe = np.where(use_log, factor, 1.0)
    score = np.where(use_log, log[0] - log[1] * np.log10(safe), linear[0] - linear[1] * factor)
    return np.clip(score, SCORE_MIN, SCORE_MAX)


def _factor(score: np.ndarray, inverse_break: float, linear, log) -> np.ndarray:
    return np.where(score >= inverse_break - BRANCH_TOL, (linear[0] - score) / linear[1],
                    10.0 ** ((log[0] - score) / log[1]))


def energy_cost_factor(cost, tfa, d=1.0):
    return _as_array('d', d) * _as_array('cost', cost) / (_as_array('tfa', tfa) + FLOOR_AREA_OFFSET)


def sap_from_cost(cost, tfa, d=1.0):
    """SAP score from annual energy cost (GBP/yr), floor area (m2) and tariff deflator."""
    return _out(_score(energy_cost_factor(cost, tfa, d), SAP_BREAK, SAP_LINEAR, SAP_LOG))


def cost_from_sap(sap, tfa, d=1.0):
    """Annual energy cost implied by a SAP score; 0 at SAP 100."""
    score = _as_array('sap', sap, positive=False)
    if np.any((score < SCORE_MIN) | (score > SCORE_MAX)):
        raise OutOfRange("SAP score outside [1, 100]")
    ecf = _factor(score, SAP_INVERSE_BREAK, SAP_LINEAR, SAP_LOG)
    return _out(ecf * (_as_array('tfa', tfa) + FLOOR_AREA_OFFSET) / _as_array('d', d))


def ei_from_eco2(eco2, tfa):
    """EI score from annual equivalent CO2 (kg/yr) and floor area (m2)."""
    cf = _as_array('eco2', eco2) / (_as_array('tfa', tfa) + FLOOR_AREA_OFFSET)
    return _out(_score(cf, EI_BREAK, EI_LINEAR, EI_LOG))


def eco2_from_ei(ei, tfa):
    score = _as_array('ei', ei, positive=False)
    if np.any((score < SCORE_MIN) | (score > SCORE_MAX)):
        raise OutOfRange("EI score outside [1, 100]")
    cf = _factor(score, EI_INVERSE_BREAK, EI_LINEAR, EI_LOG)
    return _out(cf * (_as_array('tfa', tfa) + FLOOR_AREA_OFFSET))
