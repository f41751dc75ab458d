"""Exact piecewise-linear solutions of the Hunter-Saxton equation, their
energy-resurrecting continuations, and numerical checks of their energy and
characteristic geometry."""
from .profile import CellMeta, Frame, InitialProfile, ProfileError, cell_meta, eval_u, survivor_mass
from .dissipative_solver import (
    CellState,
    EventQueue,
    Solution,
    characteristic_state,
    energy_series,
    solve_at,
)
from .continuation_engine import (
    BumpGrid,
    ContinuationPolicy,
    FaultInjectedProvider,
    ResurrectedCell,
    continue_with,
    weak_residual,
)
from .characteristics_engine import (
    CharacteristicTrace,
    PairDiagnostics,
    averaged_energy_probe,
    exponential_identity_check,
    integrate_characteristic,
    integrate_characteristics,
    pair_diagnostics,
    pair_horizon,
    riccati_check,
    separation_lower_bound_check,
)
from .flow_measure import (
    MonotoneFlowMap,
    StepFunction,
    build_flow_map,
    derivative_bound_check,
    l1_translation_modulus,
    positive_energy,
    stieltjes_change_of_variables_check,
)
from .energy_ledger import (
    EnergyReport,
    compare,
    dissipative_characterization_check,
    event_grid,
    recover_dissipative,
    window_energy_check,
)

__all__ = [
    "BumpGrid",
    "CellMeta",
    "CellState",
    "CharacteristicTrace",
    "ContinuationPolicy",
    "EnergyReport",
    "EventQueue",
    "FaultInjectedProvider",
    "Frame",
    "InitialProfile",
    "MonotoneFlowMap",
    "PairDiagnostics",
    "ProfileError",
    "ResurrectedCell",
    "Solution",
    "StepFunction",
    "averaged_energy_probe",
    "build_flow_map",
    "cell_meta",
    "characteristic_state",
    "compare",
    "continue_with",
    "derivative_bound_check",
    "dissipative_characterization_check",
    "energy_series",
    "eval_u",
    "event_grid",
    "exponential_identity_check",
    "integrate_characteristic",
    "integrate_characteristics",
    "l1_translation_modulus",
    "pair_diagnostics",
    "pair_horizon",
    "positive_energy",
    "recover_dissipative",
    "riccati_check",
    "separation_lower_bound_check",
    "solve_at",
    "stieltjes_change_of_variables_check",
    "survivor_mass",
    "weak_residual",
    "window_energy_check",
]

__version__ = "0.1.0"
