"""Training and export side of the reference need classifier.

Produces the model bundle directory read by the C++ service:
model.onnx, tokenizer.json and meta.json.
"""

from .bundle import FEATURE_TEMPLATE, CLASS_ORDER, export_bundle, quantize_bundle
from .config import TrainConfig
from .data import DataSchemaError, encode_text, read_records, token_ids
from .train import fine_tune

__all__ = ["FEATURE_TEMPLATE", "CLASS_ORDER", "TrainConfig", "DataSchemaError", "encode_text",
           "read_records", "token_ids", "fine_tune", "export_bundle", "quantize_bundle"]
