"""Long-term energy-mix capacity expansion with regulation-reserve constraints."""

__version__ = "0.1.0"

from gridmix.builder import BuildOptions, LpProblem, RowKey, VarKey, build, census, make_problem  # noqa: E402
from gridmix.mps import read_mps, write_mps  # noqa: E402
from gridmix.report import CaseDiff, EnergyMixReport, compare_cases, extract_report, write_report  # noqa: E402
from gridmix.scenario import (  # noqa: E402
    GeneratorTech,
    GlobalParams,
    ReserveParams,
    Scenario,
    ScenarioError,
    StorageTech,
    TimeSeriesInputs,
    builtin_case_study,
    load_scenario,
    save_scenario,
    stress_scenario,
    truncate_horizon,
    validate,
)
from gridmix.simplex import Solution, SolverOptions, Status, solve  # noqa: E402
from gridmix.verify import VerificationReport, verify, vertex_oracle  # noqa: E402

__all__ = [
    "BuildOptions", "CaseDiff", "EnergyMixReport", "GeneratorTech", "GlobalParams", "LpProblem",
    "ReserveParams", "RowKey", "Scenario", "ScenarioError", "Solution", "SolverOptions", "Status",
    "StorageTech", "TimeSeriesInputs", "VarKey", "VerificationReport", "build", "builtin_case_study",
    "census", "compare_cases", "extract_report", "load_scenario", "make_problem", "read_mps",
    "save_scenario", "solve", "stress_scenario", "truncate_horizon", "validate", "verify",
    "vertex_oracle", "write_mps", "write_report",
]
