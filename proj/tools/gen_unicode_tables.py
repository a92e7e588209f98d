#!/usr/bin/env python3
"""Regenerates include/tmprompt/unicode_tables.hpp from Python's unicodedata."""
import sys
import unicodedata


def ranges(pred):
    out, start = [], None
    for cp in range(0x110000):
        hit = pred(cp)
        if hit and start is None:
            start = cp
        elif not hit and start is not None:
            out.append((start, cp - 1))
            start = None
    if start is not None:
        out.append((start, 0x10FFFF))
    return out


def main():
    punct = ranges(lambda cp: unicodedata.category(chr(cp)).startswith("P"))
    lower = []
    for cp in range(0x110000):
        c = chr(cp)
        lc = c.lower()
        if len(lc) == 1 and lc != c:
            lower.append((cp, ord(lc)))
    w = sys.stdout.write
    w("// Generated by tools/gen_unicode_tables.py (Unicode %s). Do not edit.\n"
      % unicodedata.unidata_version)
    w("#pragma once\n\n#include <array>\n#include <cstdint>\n\n")
    w("namespace tmprompt::unicode::detail {\n\n")
    w("struct CodepointRange {\n  char32_t first;\n  char32_t last;\n};\n\n")
    w("struct CaseMapping {\n  char32_t upper;\n  char32_t lower;\n};\n\n")
    w("// General category P* (Pc Pd Ps Pe Pi Pf Po).\n")
    w("inline constexpr std::array<CodepointRange, %d> kPunctuation = {{\n" % len(punct))
    for a, b in punct:
        w("    {0x%04X, 0x%04X},\n" % (a, b))
    w("}};\n\n")
    w("// Simple (1:1) lowercase mappings, sorted by source codepoint.\n")
    w("inline constexpr std::array<CaseMapping, %d> kLowercase = {{\n" % len(lower))
    for a, b in lower:
        w("    {0x%04X, 0x%04X},\n" % (a, b))
    w("}};\n\n}  // namespace tmprompt::unicode::detail\n")


if __name__ == "__main__":
    main()
