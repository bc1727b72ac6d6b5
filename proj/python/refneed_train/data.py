import json
import re
from pathlib import Path

FIELDS = ["wiki_db", "page_id", "page_title", "revision_id", "section_name", "sentence",
          "next_sent", "prev_sent", "paragraph", "label"]
_TYPES = {"page_id": int, "revision_id": int, "label": int}


class DataSchemaError(ValueError):
    pass


def read_records(path):
    records = []
    with open(path, encoding="utf-8") as f:
        for n, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataSchemaError(f"{path}:{n}: {e}") from None
            if not isinstance(rec, dict) or set(rec) != set(FIELDS):
                raise DataSchemaError(f"{path}:{n}: fields must be exactly {FIELDS}")
            for k in FIELDS:
                want = _TYPES.get(k, str)
                if not isinstance(rec[k], want) or isinstance(rec[k], bool):
                    raise DataSchemaError(f"{path}:{n}: {k} must be {want.__name__}")
            if rec["label"] not in (0, 1):
                raise DataSchemaError(f"{path}:{n}: label must be 0 or 1")
            records.append(rec)
    return records


def lang_of(wiki_db):
    return wiki_db[:-4] if wiki_db.endswith("wiki") else wiki_db


def encode_text(rec, template):
    """Model input text for one record, filled the same way the service does."""
    fields = {"lang": lang_of(rec["wiki_db"]), "section": rec["section_name"],
              "sentence": rec["sentence"], "next": rec["next_sent"], "prev": rec["prev_sent"]}
    # One pass, so braces inside the filled text are left alone.
    return re.sub(r"\{(lang|section|sentence|next|prev)\}", lambda m: fields[m.group(1)], template)


def load_split(data_dir, name):
    path = Path(data_dir) / f"{name}.jsonl"
    return read_records(path) if path.exists() else []


def token_ids(tokenizer, text, max_seq_len):
    """[CLS] + head of the text's ids + [SEP], exactly as the service encodes.

    The tokenizer's own post-processor is not used, so training cannot drift
    from serving when a tokenizer.json lacks (or changes) its template.
    """
    if tokenizer.cls_token_id is None or tokenizer.sep_token_id is None:
        raise ValueError("tokenizer needs [CLS] and [SEP] tokens")
    body = tokenizer(text, add_special_tokens=False)["input_ids"][:max_seq_len - 2]
    return [tokenizer.cls_token_id] + body + [tokenizer.sep_token_id]
