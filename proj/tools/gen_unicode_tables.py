#!/usr/bin/env python3
"""Regenerate include/glassgpt/detail/unicode_tables.hpp.

The category classes are taken from the `regex` module, which is the engine
the reference GPT-2 tokenizer runs its pre-tokenization pattern on.
"""
import pathlib
import sys

import regex

CLASSES = {
    "letter": r"\p{L}",
    "number": r"\p{N}",
    "space": r"\s",
}


def ranges(pattern):
    rx = regex.compile(pattern)
    out = []
    start = None
    for cp in range(0x110000):
        hit = bool(rx.match(chr(cp)))
        if hit and start is None:
            start = cp
        elif not hit and start is not None:
            out.append((start, cp - 1))
            start = None
    if start is not None:
        out.append((start, 0x10FFFF))
    return out


def main():
    target = pathlib.Path(sys.argv[1]) if len(sys.argv) > 1 else (
        pathlib.Path(__file__).resolve().parent.parent / "include/glassgpt/detail/unicode_tables.hpp")
    lines = [
        "// Generated by tools/gen_unicode_tables.py -- do not edit.",
        f"// regex module {regex.__version__}",
        "#pragma once",
        "",
        "#include <array>",
        "#include <cstdint>",
        "",
        "namespace glassgpt::detail {",
        "",
        "struct codepoint_range {",
        "    std::uint32_t first;",
        "    std::uint32_t last;",
        "};",
        "",
    ]
    for name, pattern in CLASSES.items():
        rs = ranges(pattern)
        lines.append(f"inline constexpr std::array<codepoint_range, {len(rs)}> {name}_ranges{{{{")
        for a, b in rs:
            lines.append(f"    {{0x{a:05X}, 0x{b:05X}}},")
        lines.append("}};")
        lines.append("")
    lines.append("}  // namespace glassgpt::detail")
    target.write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
