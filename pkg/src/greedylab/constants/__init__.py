"""Constant estimators and the named inequality checks."""

from .checks import CHECKS, CheckReport, ModeUnavailable, run_check
from .estimates import NAMES, ConstantEstimate, dm_table, estimate, evaluate_witness, parse_name
from .family import SearchFamily

__all__ = ["CHECKS", "NAMES", "CheckReport", "ConstantEstimate", "ModeUnavailable", "SearchFamily", "dm_table",
           "estimate", "evaluate_witness", "parse_name", "run_check"]
