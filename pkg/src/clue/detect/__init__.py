"""The three lock detectors."""

from clue.detect.common import ATTACKED_PARITY, CREATION_FAILURE, DESTRUCTED, Finding, PipelineResult
from clue.detect.destructed import DestructionEvent, confirm_locked_destructed, run_destructed_pipeline, scan_traces_for_selfdestruct
from clue.detect.eoa import check_creation_failure, filter_sensitive_eoas, run_eoa_pipeline
from clue.detect.parity import ParityConfig, confirm_parity, run_parity_pipeline, screen_parity_candidates

__all__ = [
    "ATTACKED_PARITY",
    "CREATION_FAILURE",
    "DESTRUCTED",
    "DestructionEvent",
    "Finding",
    "ParityConfig",
    "PipelineResult",
    "check_creation_failure",
    "confirm_locked_destructed",
    "confirm_parity",
    "filter_sensitive_eoas",
    "run_destructed_pipeline",
    "run_eoa_pipeline",
    "run_parity_pipeline",
    "scan_traces_for_selfdestruct",
    "screen_parity_candidates",
]
