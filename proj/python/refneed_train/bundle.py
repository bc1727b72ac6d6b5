import json
import shutil
from pathlib import Path

import torch

# Shared contract with the C++ classifier (kFeatureTemplate, kClassOrder).
FEATURE_TEMPLATE = "{lang} [SEP] {section} [SEP] {sentence} [SEP] {next} [SEP] {prev}"
CLASS_ORDER = ["no-citation", "needs-citation"]
MODEL_NAME = "reference-need"


def write_meta(out_dir, max_seq_len, model_version):
    meta = {"model_name": MODEL_NAME, "model_version": model_version, "max_seq_len": max_seq_len,
            "class_order": CLASS_ORDER, "feature_template": FEATURE_TEMPLATE}
    Path(out_dir, "meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


def export_bundle(model, tokenizer, out_dir, max_seq_len=128, model_version=0):
    """Writes model.onnx (opset 17, dynamic batch and sequence axes),
    tokenizer.json and meta.json into out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model = model.eval()
    ids = torch.randint(5, 50, (1, 16))
    mask = torch.ones((1, 16), dtype=torch.int64)
    torch.onnx.export(model, (ids, mask), str(out / "model.onnx"),
                      input_names=["input_ids", "attention_mask"], output_names=["logits"],
                      opset_version=17, dynamo=False,
                      dynamic_axes={"input_ids": {0: "batch", 1: "seq"},
                                    "attention_mask": {0: "batch", 1: "seq"},
                                    "logits": {0: "batch"}})
    backend = getattr(tokenizer, "backend_tokenizer", None)
    if backend is None:
        raise ValueError("export needs a fast tokenizer (tokenizer.json)")
    backend.save(str(out / "tokenizer.json"))
    write_meta(out, max_seq_len, model_version)
    return out


def quantize_bundle(in_dir, out_dir):
    """Dynamic int8 quantization of the MatMul weights; activations are
    quantized at run time. tokenizer.json and meta.json are copied."""
    from onnxruntime.quantization import QuantType, quantize_dynamic
    src, dst = Path(in_dir), Path(out_dir)
    dst.mkdir(parents=True, exist_ok=True)
    quantize_dynamic(str(src / "model.onnx"), str(dst / "model.onnx"),
                     weight_type=QuantType.QInt8, op_types_to_quantize=["MatMul"])
    for name in ("tokenizer.json", "meta.json"):
        shutil.copyfile(src / name, dst / name)
    return dst
