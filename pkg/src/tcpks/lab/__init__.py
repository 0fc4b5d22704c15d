"""Configuration, checkpoints and command-line experiments."""

from .checkpoint import load as load_checkpoint, save as save_checkpoint
from .config import RunConfig, parse_config

__all__ = ["RunConfig", "parse_config", "load_checkpoint", "save_checkpoint"]
