"""Train, export and quantize a tiny locally built model end to end.

When REFNEED_BIN points at the C++ CLI, its AUC on the exported bundle is
checked against onnxruntime run from Python.
"""
import json
import os
import random
import subprocess
from pathlib import Path

import numpy as np
import onnxruntime as ort
import pytest
from sklearn.metrics import roc_auc_score
from tokenizers import BertWordPieceTokenizer
from transformers import (DistilBertConfig, DistilBertForSequenceClassification,
                          PreTrainedTokenizerFast)

from refneed_train import FEATURE_TEMPLATE, encode_text, token_ids
from refneed_train.bundle import export_bundle, quantize_bundle
from refneed_train.cli import main as cli_main

PROB_TOL = 1e-5
PROB_TOL_INT8 = 1e-3
WORDS = ("the river city was founded by a king in year population grew to people "
         "is known for its bridges and old market many visitors come every summer").split()


def _records(n, seed):
    rng = random.Random(seed)
    out = []
    for i in range(n):
        label = i % 2
        words = rng.sample(WORDS, 8)
        if label:
            words.insert(rng.randrange(8), str(rng.randrange(1000, 2000)))
        sent = " ".join(words) + "."
        out.append({"wiki_db": rng.choice(["enwiki", "frwiki"]), "page_id": i, "page_title": "T",
                    "revision_id": 100 + i, "section_name": "History", "sentence": sent,
                    "next_sent": "", "prev_sent": "", "paragraph": sent, "label": label})
    return out


def _write_jsonl(path, recs):
    path.write_text("".join(json.dumps(r) + "\n" for r in recs), encoding="utf-8")


@pytest.fixture(scope="module")
def base_model(tmp_path_factory):
    d = tmp_path_factory.mktemp("base")
    lines = [" ".join(WORDS)] + [" ".join(str(x) for x in range(1000, 2000, 7))] + ["en fr History"]
    wp = BertWordPieceTokenizer(lowercase=False, strip_accents=False)
    wp.train_from_iterator(lines * 20, vocab_size=400, min_frequency=1,
                           special_tokens=["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"])
    tok = PreTrainedTokenizerFast(tokenizer_object=wp._tokenizer, unk_token="[UNK]",
                                  pad_token="[PAD]", cls_token="[CLS]", sep_token="[SEP]",
                                  mask_token="[MASK]")
    cfg = DistilBertConfig(vocab_size=tok.vocab_size, max_position_embeddings=128, dim=32,
                           n_layers=1, n_heads=2, hidden_dim=64, num_labels=2)
    DistilBertForSequenceClassification(cfg).save_pretrained(d)
    tok.save_pretrained(d)
    return d


def test_train_export_quantize(base_model, tmp_path):
    data = tmp_path / "data"
    data.mkdir()
    _write_jsonl(data / "train.jsonl", _records(64, 1))
    valid = _records(40, 2)
    _write_jsonl(data / "valid.jsonl", valid)
    cfg = {"base_model": str(base_model), "epochs": 2, "batch_size": 8, "learning_rate": 1e-3}
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))

    ckpt, bundle, bundle8 = tmp_path / "ckpt", tmp_path / "bundle", tmp_path / "bundle8"
    assert cli_main(["train", "--data", str(data), "--config", str(tmp_path / "cfg.json"),
                     "--out", str(ckpt)]) == 0
    assert cli_main(["export", "--in", str(ckpt), "--out", str(bundle)]) == 0
    assert cli_main(["quantize", "--in", str(bundle), "--out", str(bundle8)]) == 0

    for b in (bundle, bundle8):
        assert sorted(p.name for p in b.iterdir()) == ["meta.json", "model.onnx", "tokenizer.json"]
    q_ops = {n.op_type for n in __import__("onnx").load(str(bundle8 / "model.onnx")).graph.node}
    assert "DynamicQuantizeLinear" in q_ops

    labels = [r["label"] for r in valid]
    binary = os.environ.get("REFNEED_BIN")
    for b, tol in ((bundle, PROB_TOL), (bundle8, PROB_TOL_INT8)):
        py = _ort_probs(b, valid)
        if not binary:
            continue
        scores = tmp_path / f"{b.name}.scores.jsonl"
        out = subprocess.run([binary, "evaluate", "--data", str(data / "valid.jsonl"), "--model",
                              str(b), "--boot", "100", "--scores-out", str(scores)],
                             check=True, capture_output=True, text=True)
        cpp = [json.loads(l)["score"] for l in scores.read_text().splitlines()]
        assert len(cpp) == len(py)
        assert max(abs(a - b) for a, b in zip(cpp, py)) < tol
        # AUC is only compared within one runtime: near-tied scores may swap
        # order across runtimes and move it by a whole pair.
        assert abs(json.loads(out.stdout)["auc"] - roc_auc_score(labels, cpp)) < 1e-12
    if not binary:
        pytest.skip("REFNEED_BIN not set; C++ cross-check skipped")


def _ort_probs(bundle, records):
    """needs-citation probabilities from onnxruntime and the shipped tokenizer.json."""
    tok = PreTrainedTokenizerFast(tokenizer_file=str(bundle / "tokenizer.json"), cls_token="[CLS]",
                                  sep_token="[SEP]", pad_token="[PAD]")
    sess = ort.InferenceSession(str(bundle / "model.onnx"))
    probs = []
    for r in records:
        ids = np.array([token_ids(tok, encode_text(r, FEATURE_TEMPLATE), 128)], dtype=np.int64)
        logits = sess.run(["logits"], {"input_ids": ids, "attention_mask": np.ones_like(ids)})[0][0]
        e = np.exp(logits - logits.max())
        probs.append(float(e[1] / e.sum()))
    return probs
