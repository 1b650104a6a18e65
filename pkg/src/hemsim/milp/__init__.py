from .model import (MilpInstance, build_instance, compute_big_m,
                    ST_BLOCKS, T_BLOCKS, BIN_BLOCKS, THROUGHPUT_TIEBREAK)
from .solver import SolveOptions, SolveResult, solve
from .audit import ViolationReport, check_solution
from .lp_writer import write_lp

__all__ = [
    "MilpInstance", "build_instance", "compute_big_m",
    "ST_BLOCKS", "T_BLOCKS", "BIN_BLOCKS", "THROUGHPUT_TIEBREAK",
    "SolveOptions", "SolveResult", "solve",
    "ViolationReport", "check_solution", "write_lp",
]
