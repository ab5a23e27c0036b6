from .loader import load_config, parse_flat_config
from .models import CoefficientMode, Config, EncoderConfig, ExperimentConfig, SourceConfig

__all__ = [
    "CoefficientMode",
    "Config",
    "EncoderConfig",
    "ExperimentConfig",
    "SourceConfig",
    "load_config",
    "parse_flat_config",
]
