#!/usr/bin/env python3
"""Regenerates src/common/unicode_tables.inc from Python's unicodedata."""

import sys
import unicodedata

MAX = 0x110000


def ranges(pred):
    out, start = [], None
    for cp in range(MAX):
        hit = pred(cp)
        if hit and start is None:
            start = cp
        elif not hit and start is not None:
            out.append((start, cp - 1))
            start = None
    if start is not None:
        out.append((start, MAX - 1))
    return out


def cat(cp):
    return unicodedata.category(chr(cp))


def emit_ranges(name, rs, f):
    f.write(f"constexpr CodepointRange {name}[] = {{\n")
    for lo, hi in rs:
        f.write(f"    {{0x{lo:X}, 0x{hi:X}}},\n")
    f.write("};\n\n")


def emit_map(name, entries, width, f):
    f.write(f"constexpr CodepointMapping<{width}> {name}[] = {{\n")
    for cp, seq in entries:
        vals = ", ".join(f"0x{c:X}" for c in seq)
        f.write(f"    {{0x{cp:X}, {len(seq)}, {{{vals}}}}},\n")
    f.write("};\n\n")


def main(path):
    skip_surrogates = lambda cp: 0xD800 <= cp <= 0xDFFF
    lower, upper, nfd = [], [], []
    for cp in range(MAX):
        if skip_surrogates(cp):
            continue
        ch = chr(cp)
        lo = ch.lower()
        if lo != ch:
            lower.append((cp, [ord(c) for c in lo]))
        up = ch.upper()
        if up != ch and len(up) == 1:
            upper.append((cp, [ord(up)]))
        if 0xAC00 <= cp <= 0xD7A3:
            continue  # Hangul syllables decompose algorithmically.
        d = unicodedata.normalize("NFD", ch)
        if d != ch:
            nfd.append((cp, [ord(c) for c in d]))
    width = max(len(s) for _, s in lower + nfd)
    with open(path, "w", encoding="utf-8") as f:
        f.write("// Generated by tools/gen_unicode_tables.py (Unicode "
                f"{unicodedata.unidata_version}). Do not edit.\n\n")
        f.write(f"constexpr int kMaxMappingWidth = {width};\n\n")
        emit_ranges("kPunctuationRanges", ranges(lambda c: cat(c).startswith("P")), f)
        emit_ranges("kOtherRanges", ranges(lambda c: cat(c).startswith("C")), f)
        emit_ranges("kLowercaseLetterRanges", ranges(lambda c: cat(c) == "Ll"), f)
        emit_ranges("kUppercaseLetterRanges", ranges(lambda c: cat(c) in ("Lu", "Lt")), f)
        emit_ranges("kNonspacingMarkRanges", ranges(lambda c: cat(c) == "Mn"), f)
        emit_ranges("kLetterRanges", ranges(lambda c: cat(c).startswith("L")), f)
        emit_map("kLowercaseMap", lower, width, f)
        emit_map("kUppercaseMap", upper, width, f)
        emit_map("kDecompositionMap", nfd, width, f)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "src/common/unicode_tables.inc")
