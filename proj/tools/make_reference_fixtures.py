#!/usr/bin/env python3
"""Freeze forward-pass reference values from the Hugging Face GPT-2 implementation.

Loads a checkpoint with the `safetensors` package (not our reader) into
transformers' GPT2LMHeadModel, float32, eager attention, and records:

  reference_gpt2.json   prompts, ids, top-10, greedy continuations, block-0 states
  reference_logits.f32  last-position logits per prompt, little-endian float32

Usage: make_reference_fixtures.py MODEL_DIR OUT_DIR
MODEL_DIR holds model.safetensors, vocab.json and merges.txt.
"""

import hashlib
import json
import sys
from pathlib import Path

import numpy as np
import torch
from safetensors import safe_open
from transformers import GPT2Config, GPT2LMHeadModel, GPT2Tokenizer

LOGIT_PROMPTS = [
    "the quick brown",
    "Hello world",
    "The capital of France is",
    "In 1905, Albert Einstein published",
    "def fibonacci(n):\n    return",
]
GREEDY_PROMPTS = LOGIT_PROMPTS[:3]
GREEDY_STEPS = 10
STATE_PROMPT = "the quick brown"


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def load(model_dir):
    path = model_dir / "model.safetensors"
    with safe_open(str(path), "pt") as f:
        meta = f.metadata() or {}
        state = {k: f.get_tensor(k) for k in f.keys()}
    wte = state["wte.weight"]
    wpe = state["wpe.weight"]
    n_layer = 1 + max(int(k.split(".")[1]) for k in state if k.startswith("h."))
    config = GPT2Config(
        vocab_size=wte.shape[0],
        n_positions=wpe.shape[0],
        n_embd=wte.shape[1],
        n_layer=n_layer,
        n_head=int(meta.get("n_head", 12)),
        n_inner=state["h.0.mlp.c_fc.weight"].shape[1],
        activation_function="gelu_new",
        layer_norm_epsilon=1e-5,
        resid_pdrop=0.0,
        embd_pdrop=0.0,
        attn_pdrop=0.0,
        tie_word_embeddings=True,
    )
    config._attn_implementation = "eager"
    model = GPT2LMHeadModel(config).float().eval()
    prefixed = {"transformer." + k: v for k, v in state.items() if not k.endswith(".attn.bias")}
    missing, unexpected = model.load_state_dict(prefixed, strict=False)
    missing = [k for k in missing if k != "lm_head.weight" and not k.endswith(".attn.bias")]
    if missing or unexpected:
        sys.exit(f"checkpoint mismatch: missing={missing} unexpected={unexpected}")
    model.tie_weights()
    assert torch.equal(model.lm_head.weight, model.transformer.wte.weight)
    return model, sha256(path)


@torch.no_grad()
def last_logits(model, ids):
    return model(torch.tensor([ids])).logits[0, -1].float()


@torch.no_grad()
def greedy(model, ids, steps):
    seq = list(ids)
    out = []
    margin = float("inf")
    for _ in range(steps):
        z = last_logits(model, seq)
        # torch.argmax returns the first maximal index, i.e. the lowest id on ties.
        nxt = int(torch.argmax(z))
        top2 = torch.topk(z, 2).values
        margin = min(margin, float(top2[0] - top2[1]))
        seq.append(nxt)
        out.append(nxt)
    return out, margin


@torch.no_grad()
def block0_states(model, ids):
    captured = {}
    attn = model.transformer.h[0].attn

    def hook(module, args, output):
        captured["attn"] = output[0][0].clone()

    handle = attn.register_forward_hook(hook)
    out = model(torch.tensor([ids]), output_hidden_states=True)
    handle.remove()
    emb = out.hidden_states[0][0]
    return {
        "embedding": emb.tolist(),
        "resid1": (emb + captured["attn"]).tolist(),
        "block0_out": out.hidden_states[1][0].tolist(),
    }


def main():
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    model_dir, out_dir = Path(sys.argv[1]), Path(sys.argv[2])
    torch.set_num_threads(1)
    tok = GPT2Tokenizer(str(model_dir / "vocab.json"), str(model_dir / "merges.txt"))
    model, digest = load(model_dir)

    prompts = []
    logits = []
    for text in LOGIT_PROMPTS:
        ids = tok.encode(text)
        z = last_logits(model, ids)
        order = sorted(range(z.numel()), key=lambda i: (-float(z[i]), i))
        top = order[:11]
        gaps = [float(z[top[i]] - z[top[i + 1]]) for i in range(10)]
        prompts.append({"text": text, "ids": ids, "top10": top[:10], "min_top10_gap": min(gaps)})
        logits.append(z.numpy().astype("<f4"))
        print(f"{text!r}: {len(ids)} tokens, top1 {top[0]}, min gap {min(gaps):.3g}")

    greedy_cases = []
    for text in GREEDY_PROMPTS:
        ids = tok.encode(text)
        continuation, margin = greedy(model, ids, GREEDY_STEPS)
        greedy_cases.append({"text": text, "ids": ids, "continuation": continuation, "min_top1_margin": margin})
        print(f"greedy {text!r}: {continuation}, min margin {margin:.3g}")

    state_ids = tok.encode(STATE_PROMPT)
    doc = {
        "generator": "transformers GPT2LMHeadModel, float32, eager attention",
        "transformers_version": __import__("transformers").__version__,
        "torch_version": torch.__version__,
        "checkpoint_sha256": digest,
        "vocab_size": int(model.config.vocab_size),
        "logits_file": "reference_logits.f32",
        "prompts": prompts,
        "greedy": greedy_cases,
        "states": {"text": STATE_PROMPT, "ids": state_ids, **block0_states(model, state_ids)},
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "reference_gpt2.json").write_text(json.dumps(doc, indent=1) + "\n")
    np.concatenate(logits).tofile(out_dir / "reference_logits.f32")
    print("checkpoint", digest)


if __name__ == "__main__":
    main()
