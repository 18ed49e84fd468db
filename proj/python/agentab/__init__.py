"""Agent-based A/B testing of web shop designs."""

from ._agentab import (  # noqa: F401
    __version__,
    chi_square_2x2,
    filter_options,
    parse_action,
    run_pipeline,
    search,
    serialize_action,
    two_sample_t,
)
