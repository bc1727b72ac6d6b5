import logging
import math
import random

import numpy as np
import torch
from sklearn.metrics import roc_auc_score
from transformers import AutoModelForSequenceClassification, AutoTokenizer

from .bundle import FEATURE_TEMPLATE
from .data import encode_text, token_ids

log = logging.getLogger(__name__)


def _seed_everything(seed):
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)


def _batches(records, size, shuffle, rng):
    order = list(range(len(records)))
    if shuffle:
        rng.shuffle(order)
    for i in range(0, len(order), size):
        yield [records[j] for j in order[i:i + size]]


def _encode(tokenizer, batch, max_len):
    rows = [token_ids(tokenizer, encode_text(r, FEATURE_TEMPLATE), max_len) for r in batch]
    width = max(len(r) for r in rows)
    pad = tokenizer.pad_token_id or 0
    enc = {"input_ids": torch.tensor([r + [pad] * (width - len(r)) for r in rows]),
           "attention_mask": torch.tensor([[1] * len(r) + [0] * (width - len(r)) for r in rows])}
    labels = torch.tensor([r["label"] for r in batch], dtype=torch.long)
    return enc, labels


@torch.no_grad()
def predict(model, tokenizer, records, config):
    model.eval()
    probs = []
    for batch in _batches(records, config.batch_size, False, None):
        enc, _ = _encode(tokenizer, batch, config.max_seq_len)
        logits = model(input_ids=enc["input_ids"], attention_mask=enc["attention_mask"]).logits
        probs.extend(torch.softmax(logits, dim=-1)[:, 1].tolist())
    return probs


def fine_tune(train_records, valid_records, config, out_dir=None):
    """Fine-tunes config.base_model; returns (model, tokenizer, history).

    history holds one dict per epoch with the mean training loss and the
    validation AUC (None when validation has a single class). When out_dir
    is given, the best epoch by validation AUC (or the last, without
    validation) is saved there with save_pretrained.
    """
    if not train_records:
        raise ValueError("no training records")
    _seed_everything(config.seed)
    tokenizer = AutoTokenizer.from_pretrained(config.base_model)
    model = AutoModelForSequenceClassification.from_pretrained(config.base_model, num_labels=2)
    no_decay = ("bias", "LayerNorm.weight", "layer_norm.weight")
    groups = [
        {"params": [p for n, p in model.named_parameters() if not n.endswith(no_decay)],
         "weight_decay": config.weight_decay},
        {"params": [p for n, p in model.named_parameters() if n.endswith(no_decay)],
         "weight_decay": 0.0},
    ]
    opt = torch.optim.AdamW(groups, lr=config.learning_rate)
    rng = random.Random(config.seed)
    history, best = [], -math.inf
    for epoch in range(config.epochs):
        model.train()
        losses = []
        for batch in _batches(train_records, config.batch_size, True, rng):
            enc, labels = _encode(tokenizer, batch, config.max_seq_len)
            out = model(input_ids=enc["input_ids"], attention_mask=enc["attention_mask"], labels=labels)
            opt.zero_grad()
            out.loss.backward()
            opt.step()
            losses.append(out.loss.item())
        auc = None
        labels = [r["label"] for r in valid_records]
        if valid_records and len(set(labels)) == 2:
            auc = float(roc_auc_score(labels, predict(model, tokenizer, valid_records, config)))
        history.append({"epoch": epoch + 1, "loss": float(np.mean(losses)), "valid_auc": auc})
        log.info("epoch %d loss %.4f valid_auc %s", epoch + 1, history[-1]["loss"], auc)
        score = auc if auc is not None else epoch
        if out_dir is not None and score > best:
            best = score
            model.save_pretrained(out_dir)
            tokenizer.save_pretrained(out_dir)
    return model, tokenizer, history
