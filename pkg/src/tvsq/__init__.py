"""Hammerstein-Wiener models of time-varying subjective video quality.

A static input sigmoid, a linear IIR filter and a static output sigmoid map a
per-second short-time quality series to the continuous quality viewers report
while watching. The package covers simulation, training by outage-rate
minimisation, order selection, stability diagnostics, subjective-score
preprocessing and synthetic ground-truth data.
"""
from .data import TrainingDataset, TraceRecord, TVSQTrace
from .errors import (
    AggregationError,
    ContractError,
    DatasetFormatError,
    DegenerateSubjectError,
    InversionRangeError,
    StabilityError,
    TVSQError,
)
from .ident import TrainConfig, TrainReport, outage_rate, train
from .model import (
    NEAR_IDENTITY,
    REFERENCE_LINEAR_OUTPUT,
    HWParams,
    LinearOutputParams,
    PredictedTrace,
    simulate,
    simulate_linear_output,
    spectral_radius,
)
from .order import OrderScan, select_order
from .synth import GroundTruthSpec, TargetSpec, generate_ground_truth

__version__ = "0.1.0"

__all__ = [
    "AggregationError",
    "ContractError",
    "DatasetFormatError",
    "DegenerateSubjectError",
    "GroundTruthSpec",
    "HWParams",
    "InversionRangeError",
    "LinearOutputParams",
    "NEAR_IDENTITY",
    "OrderScan",
    "REFERENCE_LINEAR_OUTPUT",
    "PredictedTrace",
    "StabilityError",
    "TVSQError",
    "TVSQTrace",
    "TargetSpec",
    "TrainConfig",
    "TrainReport",
    "TraceRecord",
    "TrainingDataset",
    "generate_ground_truth",
    "outage_rate",
    "select_order",
    "simulate",
    "simulate_linear_output",
    "spectral_radius",
    "train",
]
