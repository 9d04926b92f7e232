"""Entanglement distribution network simulator."""

from ._eprnet import (
    FrameError,
    builtin_maps,
    crc16,
    decode_instruction,
    default_scenario_yaml,
    dynamic_range_db,
    encode_instruction,
    exceeds_classical_limit,
    links,
    map_lines,
    run_dynamic,
    run_static,
    validate_map,
)

__all__ = [
    "FrameError",
    "builtin_maps",
    "crc16",
    "decode_instruction",
    "default_scenario_yaml",
    "dynamic_range_db",
    "encode_instruction",
    "exceeds_classical_limit",
    "links",
    "map_lines",
    "run_dynamic",
    "run_static",
    "validate_map",
]
