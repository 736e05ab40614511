"""Probabilistic temporal-logic verification and iterative refinement of generated videos."""

from .automaton import ConfidenceMatrix, VideoAutomaton, build_automaton, layer_distribution
from .calibration import CalibrationModel, apply_calibration, fit_calibration, token_confidence
from .checker import SatisfactionResult, compile_monitor, oracle_satisfaction, satisfaction_probability
from .diagnosis import DiagnosisReport, diagnose, localize_frame, weakest_proposition
from .logic import (
    Always, And, Atom, Eventually, Formula, Implies, Next, Not, Or, Proposition, PropositionSet, Seq,
    Spec, Until, evaluate_trace, parse_formula, to_text,
)

__version__ = "0.1.0"

__all__ = [
    "Always", "And", "Atom", "CalibrationModel", "ConfidenceMatrix", "DiagnosisReport", "Eventually",
    "Formula", "Implies", "Next", "Not", "Or", "Proposition", "PropositionSet", "SatisfactionResult",
    "Seq", "Spec", "Until", "VideoAutomaton", "apply_calibration", "build_automaton", "compile_monitor",
    "diagnose", "evaluate_trace", "fit_calibration", "layer_distribution", "localize_frame",
    "oracle_satisfaction", "parse_formula", "satisfaction_probability", "to_text", "token_confidence",
    "weakest_proposition",
]
