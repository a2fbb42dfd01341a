"""Virtual-time testing chain for microgrid supervisory controllers.

A control algorithm is carried through four coupling stages of increasing
realism: direct in-process calls (stage 1), a bit-exact register/frame codec
over a lossless channel (stage 2), the same codec behind a deterministic
message-impairment emulator (stage 3), and finally an emulated power
interface with amplifier, probe and ideal-transformer coupling (stage 4).
Traces from all stages are comparable signal by signal.
"""

__version__ = "0.1.0"

from gridloop.powersim import (
    SimConfig,
    GridScenario,
    GridState,
    GridSim,
    init_grid,
    step_dynamics,
    power_balance_residual,
)
from gridloop.stagelink import StageKind, Frame, ImpairmentProfile, Trace
from gridloop.chainrunner import load_scenario, run_stage, run_ladder, compare_traces

__all__ = [
    "SimConfig",
    "GridScenario",
    "GridState",
    "GridSim",
    "init_grid",
    "step_dynamics",
    "power_balance_residual",
    "StageKind",
    "Frame",
    "ImpairmentProfile",
    "Trace",
    "load_scenario",
    "run_stage",
    "run_ladder",
    "compare_traces",
]
