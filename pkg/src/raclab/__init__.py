"""Finite-blocklength toolkit for symmetric random access channels."""
from .channel import (
    AssumptionReport,
    ChannelError,
    ChannelFamily,
    InputDistribution,
    channel_from_json,
    check_assumptions,
    make_adder_erasure,
    make_binary_example,
    make_noise_only,
)
from .infodensity import ChannelStatistics, LemmaReport, density, statistics, verify_orderings

__version__ = "0.1.0"
