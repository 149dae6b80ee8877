"""Modality encoders, gated fusion and the SAP/EI heads."""

from .encoders import SpatialEncoder, TabularEncoder, TextEncoder
from .model import (TEXT_PROJECTION_GROUP, FusionModel, FusionOutput, Gate, build_ablation_model, load_model,
                    save_model)
from .predictor import PredictFn, Predictor, TabularFunction
