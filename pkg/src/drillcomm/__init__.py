"""Acoustic drill-string telemetry simulator.

Physically derived comb-filter channel, an end-to-end trainable autoencoder
modem, an NC-OFDM baseline at matched throughput, and a reproducible
evaluation CLI (BER, PAPR, PSD).
"""

__version__ = "0.1.0"

from .channel import (
    ChannelRealization,
    DrillStringSpec,
    ScatterCoefficients,
    channel_realization,
    discrete_impulse_response,
    frequency_response,
    scatter,
    string_matrix,
    wavenumber,
)
from .config import SimConfig, load_config

__all__ = [
    "ChannelRealization",
    "DrillStringSpec",
    "ScatterCoefficients",
    "SimConfig",
    "channel_realization",
    "discrete_impulse_response",
    "frequency_response",
    "load_config",
    "scatter",
    "string_matrix",
    "wavenumber",
    "__version__",
]
