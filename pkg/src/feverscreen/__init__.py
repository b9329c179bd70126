"""Fever screening from thermal-sensor readings: sensor simulation, a
NARX-style neural detector, evaluation metrics and fixed-point Verilog
generation."""

from .dataset import CohortSpec, Dataset, generate_cohort, split_dataset
from .detector import NarxConfig, classify, evaluate
from .hdlgen import QFormat, emit_verilog, fixed_point_forward, quantize_model
from .nn import Network, TrainConfig, init_weights, load_model, save_model, train
from .sensor import SensorModel

__version__ = "0.1.0"

__all__ = [
    "CohortSpec", "Dataset", "generate_cohort", "split_dataset",
    "NarxConfig", "classify", "evaluate",
    "QFormat", "emit_verilog", "fixed_point_forward", "quantize_model",
    "Network", "TrainConfig", "init_weights", "load_model", "save_model", "train",
    "SensorModel",
]
