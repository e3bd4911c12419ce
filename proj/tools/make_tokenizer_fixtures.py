#!/usr/bin/env python3
"""Build the tokenizer parity corpus and its reference ids.

Writes tests/fixtures/tokenizer_corpus.jsonl, one {"text", "ids"} object per
line. Ids come from transformers' GPT2Tokenizer (the regex-based port of the
original encoder) and are cross-checked against a byte-level BPE built
directly with the Rust `tokenizers` library.

Usage: make_tokenizer_fixtures.py VOCAB_DIR OUT_FILE [LINES]
"""

import json
import random
import sys

from tokenizers import Tokenizer, decoders, models, pre_tokenizers
from transformers import GPT2Tokenizer

WORDS = """the of and to in is was for on that with as by at from it an be this which or are
have has had not but were been their they one all there would more if can will about when who
its into time only new some could these two may than first any like other over such our also
Hello World OpenAI Transformer attention GPT tokenization byte pair encoding résumé naïve café
façade Zürich coöperate déjà vu São Paulo Москва Київ Ελλάδα שלום مرحبا नमस्ते ภาษาไทย""".split()

CJK = "的一是不了人我在有他这中大来上国个到说们为子和你地出道也时年得就那要下以生会自着去之过家学对可她里后小么心多天而能好都然没日于起还发成事只作当想看文无开手十用主行方又如前所本见经头面公同三已老从动两长知民样现分将外但身些与高意进把法此实回二理美点月明其种声全工己话儿者向情部正名定女问力机给等几很业最间新什打便位因重被走电四第门相次东政海口使教西再平真听世气信北少关并内加化由却代军产入先山五太水万市眼体别处总才场师书比住员九笑性通目华报立马命张活难神数件安表原车白应路期叫死常提感金何更反合放做系计或司利受光王果亲界及今京务制解各任至清物台象记边共风战干接它许八特觉望直服毛林题建南度统色字请交爱让认算论百吃义科怎元社术结六功指思非流每青管夫连远资队跟带花快条院变联言权往展该领传近留红治决周保达办运武半候七必城父强步完革深区即求品士转量空甚众技轻程告江语英基派满式李息写呢识极令黄德收脸钱党倒未持音跑据云火干"
HIRAGANA = "あいうえおかきくけこさしすせそたちつてとなにぬねのはひふへほまみむめもやゆよらりるれろわをんがぎぐげござじずぜぞだぢづでどばびぶべぼぱぴぷぺぽ"
HANGUL = "가나다라마바사아자차카타파하한국어안녕하세요감사합니다서울부산"
EMOJI = ["😀", "😂", "🎉", "🚀", "❤️", "👍🏽", "👨‍👩‍👧‍👦", "🏳️‍🌈", "🇯🇵", "🤖", "🔥", "✨", "🧪", "🐍", "☕", "1️⃣"]
PUNCT = list(".,;:!?()[]{}<>\"'`~@#$%^&*-_=+/\\|") + ["...", "--", "—", "–", "“", "”", "‘", "’", "«", "»", "…", "¿", "¡"]
CONTRACTIONS = ["'s", "'t", "'re", "'ve", "'m", "'ll", "'d", "'S", "'T", "'RE", "'LL", "’s", "'x", "''"]
SPACES = [" ", "  ", "   ", "\t", "\n", "\n\n", "\r\n", " \n", " ", "　", " ", "​", "\v", "\f"]
CONTROLS = [chr(c) for c in list(range(0x00, 0x09)) + [0x0E, 0x0F, 0x10, 0x1B, 0x1F, 0x7F, 0x85, 0x9F]]
MISC = ["é", "ǟ", "Å", "ﬁ", "²", "½", "Ⅻ", "٣", "१२", "𝔘𝔫𝔦", "𐍈", "﻿", "�",
        "‍", "‮", "ß", "ǅ", "ǈ", "ℌ", "∑", "√2", "≠", "€100", "¥", "£5.99", "0x1F", "3.14159",
        "1,000,000", "2024-10-16", "12:30pm", "C++20", "e.g.", "U.S.A.", "http://example.com/a?b=c&d=e",
        "foo_bar", "camelCaseWord", "snake_case_42", "<|endoftext|>", "<html>", "</div>", "#include"]


def pick_cjk(rng):
    pool = rng.choice([CJK, HIRAGANA, HANGUL])
    return "".join(rng.choice(pool) for _ in range(rng.randint(1, 8)))


def make_line(rng, kind):
    parts = []
    for _ in range(rng.randint(1, 14)):
        r = rng.random()
        if kind == "cjk" and r < 0.5:
            parts.append(pick_cjk(rng))
        elif kind == "emoji" and r < 0.4:
            parts.append(rng.choice(EMOJI))
        elif kind == "control" and r < 0.3:
            parts.append(rng.choice(CONTROLS))
        elif kind == "space" and r < 0.4:
            parts.append(rng.choice(SPACES))
        elif r < 0.45:
            w = rng.choice(WORDS)
            parts.append(w.upper() if rng.random() < 0.1 else w.capitalize() if rng.random() < 0.2 else w)
        elif r < 0.55:
            parts.append(rng.choice(PUNCT))
        elif r < 0.62:
            parts.append(rng.choice(CONTRACTIONS))
        elif r < 0.70:
            parts.append(str(rng.randint(0, 10 ** rng.randint(1, 9))))
        elif r < 0.76:
            parts.append(rng.choice(MISC))
        elif r < 0.82:
            parts.append(pick_cjk(rng))
        elif r < 0.87:
            parts.append(rng.choice(EMOJI))
        elif r < 0.90:
            parts.append(rng.choice(CONTROLS))
        else:
            parts.append(rng.choice(SPACES))
        parts.append(rng.choice([" ", " ", " ", "", "  ", "\n"]))
    line = "".join(parts)
    return line.rstrip(" ") if rng.random() < 0.5 else line


HANDPICKED = [
    "Hello world",
    "",
    " ",
    "   ",
    "\n",
    "the quick brown fox jumps over the lazy dog",
    "I'm sure they'll say it's fine, but we'd've known.",
    "DON'T SHOUT, I'M RIGHT HERE",
    "trailing spaces   ",
    "  leading spaces",
    "tabs\tand\t\ttabs",
    "mixed   \n  whitespace\r\n\tend",
    "123456789012345678901234567890",
    "你好，世界！这是一个测试。",
    "日本語のテキストとカタカナ",
    "한국어 문장입니다.",
    "emoji 🎉🎉🎉 and family 👨‍👩‍👧‍👦 and flags 🇺🇸🇬🇧",
    "\x00\x01\x02\x1b[31mred\x1b[0m\x7f",
    "naïve café résumé coöperate",
    "Ελληνικά και Русский и עברית ו العربية",
    "def f(x):\n    return x ** 2\n",
    "áb̂c̃",
    "﻿BOM at start",
    "zero​width‍space",
    "<|endoftext|>",
    "x<|endoftext|>y",
]


def main():
    if len(sys.argv) not in (3, 4):
        sys.exit(__doc__)
    vocab_dir, out_file = sys.argv[1], sys.argv[2]
    n_lines = int(sys.argv[3]) if len(sys.argv) == 4 else 1200
    slow = GPT2Tokenizer(f"{vocab_dir}/vocab.json", f"{vocab_dir}/merges.txt")
    fast = Tokenizer(models.BPE.from_file(f"{vocab_dir}/vocab.json", f"{vocab_dir}/merges.txt"))
    fast.pre_tokenizer = pre_tokenizers.ByteLevel(add_prefix_space=False)
    fast.decoder = decoders.ByteLevel()

    rng = random.Random(20241016)
    kinds = ["plain", "cjk", "emoji", "control", "space"]
    lines = list(HANDPICKED)
    while len(lines) < n_lines:
        lines.append(make_line(rng, kinds[len(lines) % len(kinds)]))

    disagreements = 0
    with open(out_file, "w", encoding="utf-8") as out:
        for text in lines:
            # Plain text only: "<|endoftext|>" in user input is ordinary characters.
            ids = slow.encode(text, split_special_tokens=True)
            if fast.encode(text).ids != ids:
                disagreements += 1
                print("slow/fast disagree:", repr(text), file=sys.stderr)
            if slow.decode(ids, clean_up_tokenization_spaces=False) != text:
                sys.exit(f"reference round trip failed for {text!r}")
            out.write(json.dumps({"text": text, "ids": ids}, ensure_ascii=False) + "\n")
    print(f"{len(lines)} lines, {disagreements} slow/fast disagreements")
    if disagreements:
        sys.exit("reference tokenizers disagree")


if __name__ == "__main__":
    main()
