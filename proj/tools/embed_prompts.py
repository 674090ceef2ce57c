#!/usr/bin/env python3
"""Regenerate the built-in template block of prompts.hpp from prompts/*.txt."""
import pathlib
import re

root = pathlib.Path(__file__).resolve().parent.parent
header = root / "include" / "alphamcts" / "prompts.hpp"
kinds = ["portrait", "formula", "overfitting", "refine", "suggestions", "repair", "summarize"]

parts = []
for k in kinds:
    text = (root / "prompts" / f"{k}.txt").read_text()
    if ')TPL"' in text:
        raise SystemExit(f"{k}.txt contains the raw-string delimiter")
    parts.append(f'inline constexpr std::string_view {k} = R"TPL({text})TPL";\n')

src = header.read_text()
begin = "// Generated from prompts/*.txt; a unit test keeps the two in sync.\n"
end = "}  // namespace builtin_prompts"
pattern = re.compile(re.escape(begin) + ".*?" + re.escape(end), re.S)
src = pattern.sub(lambda _: begin + "\n".join(parts) + end, src)
header.write_text(src)
