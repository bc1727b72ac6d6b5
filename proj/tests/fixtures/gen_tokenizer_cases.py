#!/usr/bin/env python3
"""Freezes HF `tokenizers` output for the C++ WordPiece tokenizer tests.

Takes the tiny bundle's tokenizer.json, derives normalizer variants from it
(cased, lowercased, lowercase-but-keep-accents, no text cleaning, no CJK
padding), and records token ids for a fixed battery plus random strings
drawn from a mixed-script character pool.

usage: gen_tokenizer_cases.py SRC_TOKENIZER_JSON OUT_DIR
"""

import json
import os
import random
import sys

from tokenizers import Tokenizer

VARIANTS = {
    "cased": dict(lowercase=False, strip_accents=False, clean_text=True,
                  handle_chinese_chars=True),
    "uncased": dict(lowercase=True, strip_accents=None, clean_text=True,
                    handle_chinese_chars=True),
    "uncased_keep_accents": dict(lowercase=True, strip_accents=False, clean_text=True,
                                 handle_chinese_chars=True),
    "strip_only": dict(lowercase=False, strip_accents=True, clean_text=True,
                       handle_chinese_chars=True),
    "raw": dict(lowercase=False, strip_accents=False, clean_text=False,
                handle_chinese_chars=False),
}

FIXED = [
    "",
    "The Western Jackdaw (Coloeus monedula) is a passerine bird.",
    "ÉCOLE Élève naïve café Ünïcödé",
    "İstanbul ŞEHİR ΣΊΣΥΦΟΣ Straße",
    "한국어 문장입니다. 가나다",
    "é ä combining marks",
    "ﬁne ligature ½ fraction ① circled",
    "control\x00\x01\x7f chars� here",
    "[CLS] leading [SEP]middle[SEP] [PAD][UNK] [MASK]",
    "[sep] lowercase special [SEP",
    "emoji 😀👍🏽 and \U0001F1FA\U0001F1F8 flags",
    "寒鸦是鸦科鸦属的鸟类 with 𠀀 ext-B and 〇 sign",
    "x" * 100,
    "x" * 101,
    "y" * 99 + "é",
    "tabs\tand\nnewlines\r\nand nbsp​ zero width　ideographic",
]

POOL = (
    "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"
    "     .,;:!?'\"()[]{}-_/\\@#$%^&*+=<>|~`"
    "éèêëàâäôöûüçñÉÈÀÖÜßİıŞşĞğ"
    "̧́̈"
    "абвгдеёжзийклмнопрстуфхцчшщъыьэюяАБВГД"
    "αβγδεζηθΣΊ"
    "寒鸦是科属的鸟类分布于欧洲西亚和北非日本語文章"
    "ニシコクマルガラスはスズメ目カラス科"
    "한국어문장"
    "کلاغگردنخاکستری‌"
    "\t\n\r ​ 　\x00\x07�"
    "—–…«»„“”‘’·•°§¶"
    "😀👍🏽"
)


def variant_json(base, cfg):
    data = json.loads(json.dumps(base))
    data["normalizer"] = {"type": "BertNormalizer", **cfg}
    return data


def main():
    src, out_dir = sys.argv[1], sys.argv[2]
    os.makedirs(out_dir, exist_ok=True)
    with open(src, encoding="utf-8") as f:
        base = json.load(f)
    rnd = random.Random(5)
    vocab = base["model"]["vocab"]
    words = [w for w in vocab if not w.startswith("##") and not w.startswith("[")]
    texts = list(FIXED)
    for _ in range(300):
        n = rnd.randint(1, 40)
        parts = []
        while len(parts) < n:
            r = rnd.random()
            if r < 0.4:
                parts.append(rnd.choice(words))
            elif r < 0.45:
                parts.append(rnd.choice(["[SEP]", "[CLS]", "[UNK]"]))
            else:
                parts.append("".join(rnd.choice(POOL) for _ in range(rnd.randint(1, 6))))
        sep = rnd.choice([" ", "", " ", "  "])
        texts.append(sep.join(parts))

    manifest = []
    for name, cfg in VARIANTS.items():
        data = variant_json(base, cfg)
        path = os.path.join(out_dir, name + ".json")
        with open(path, "w", encoding="utf-8") as f:
            json.dump(data, f, ensure_ascii=False)
        tok = Tokenizer.from_file(path)
        cases = [{"text": t, "ids": tok.encode(t, add_special_tokens=False).ids} for t in texts]
        manifest.append({"tokenizer": name + ".json", "cases": cases})
    with open(os.path.join(out_dir, "cases.json"), "w", encoding="utf-8") as f:
        json.dump(manifest, f, ensure_ascii=False)


if __name__ == "__main__":
    main()
