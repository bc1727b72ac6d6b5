import argparse
import json
import logging
import sys

from .config import TrainConfig


def main(argv=None):
    ap = argparse.ArgumentParser(prog="refneed-train")
    sub = ap.add_subparsers(dest="cmd", required=True)
    t = sub.add_parser("train", help="fine-tune on DIR/train.jsonl (+ valid.jsonl)")
    t.add_argument("--data", required=True)
    t.add_argument("--config")
    t.add_argument("--out", required=True)
    q = sub.add_parser("quantize", help="dynamic int8 quantization of a bundle")
    q.add_argument("--in", dest="inp", required=True)
    q.add_argument("--out", required=True)
    e = sub.add_parser("export", help="checkpoint directory to model bundle")
    e.add_argument("--in", dest="inp", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--max-seq-len", type=int, default=128)
    e.add_argument("--model-version", type=int, default=0)
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    if args.cmd == "train":
        from .data import load_split
        from .train import fine_tune
        cfg = TrainConfig.load(args.config) if args.config else TrainConfig()
        train = load_split(args.data, "train")
        valid = load_split(args.data, "valid")
        _, _, history = fine_tune(train, valid, cfg, out_dir=args.out)
        json.dump(history, sys.stdout)
        print()
    elif args.cmd == "export":
        from transformers import AutoModelForSequenceClassification, AutoTokenizer
        from .bundle import export_bundle
        model = AutoModelForSequenceClassification.from_pretrained(args.inp)
        tok = AutoTokenizer.from_pretrained(args.inp)
        export_bundle(model, tok, args.out, args.max_seq_len, args.model_version)
    else:
        from .bundle import quantize_bundle
        quantize_bundle(args.inp, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
