"""Heuristic responder for fully offline runs.

Understands the package's own rendered templates and answers from token
statistics: coherency from cross-paragraph token support, summaries and
labels from frequent tokens, assignment and judging from token overlap,
stance from a small keyword lexicon.  Pure function of the prompt text.
"""

from __future__ import annotations

import re
from collections import Counter

_STOP = frozenset(
    "a an and are as at be but by for from has have if in into is it its no "
    "not of on or our so such that the their them they this to us was we "
    "were what when which will with you your".split()
)
_SCAFFOLD = frozenset({"texts", "about"})

_PRO_CLIMATE = frozenset(
    "climate solar renewable renewables clean green sustainable wind "
    "emissions conservation recycling deforestation warming".split()
)
_PRO_ENERGY = frozenset(
    "oil gas coal fracking drilling fossil pipeline petroleum propane "
    "ethanol mining".split()
)


def _tokens(text: str) -> list[str]:
    toks = re.findall(r"[a-z0-9]+", text.lower())
    return [t for t in toks if len(t) > 1 and t not in _STOP]


def _top_tokens(texts, n):
    counts = Counter()
    for text in texts:
        counts.update(_tokens(text))
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [tok for tok, _ in ranked[:n]]


def _numbered_items(block: str) -> list[str]:
    return [m.group(1).strip()
            for m in re.finditer(r"(?m)^\d+\. (.*)$", block)]


def _respond_coherency(prompt: str) -> str:
    paras = re.findall(r"(?m)^Paragraph \d+: (.*)$", prompt)
    paras = paras[-5:]
    support = Counter()
    for p in paras:
        support.update(set(_tokens(p)))
    common = [t for t, c in sorted(support.items(), key=lambda kv: (-kv[1], kv[0]))
              if c >= 4]
    if common:
        return ("Cluster Coherency: Coherent\n"
                f"Reasoning: The paragraphs share the topic '{common[0]}'.")
    return ("Cluster Coherency: Incoherent\n"
            "Reasoning: The cluster is incoherent because the labels are "
            "inconsistent.")


def _respond_summary(prompt: str) -> str:
    body = prompt.split("Summarize the following texts", 1)[1]
    items = _numbered_items(body)
    top = _top_tokens(items, 3)
    if not top:
        return "Texts with no distinctive vocabulary."
    return "Texts about " + ", ".join(top) + "."


def _respond_theme_label(prompt: str) -> str:
    m = re.search(r"(?m)^Summary: (.*)$", prompt)
    toks = [t for t in _tokens(m.group(1) if m else "")
            if t not in _SCAFFOLD]
    ranked = sorted(Counter(toks).items(), key=lambda kv: (-kv[1], kv[0]))
    words = [tok.capitalize() for tok, _ in ranked[:2]]
    return " ".join(words) if words else "General Discussion"


def _respond_assign(prompt: str) -> str:
    cand_block = prompt.split("Candidate", 1)[1]
    cand_block = cand_block.split("Texts:", 1)[0]
    candidates = [m.group(1).strip()
                  for m in re.finditer(r"(?m)^- (.*)$", cand_block)]
    texts = _numbered_items(prompt.split("Texts:", 1)[1])
    lines = []
    for i, text in enumerate(texts, start=1):
        text_toks = set(_tokens(text))
        best, best_overlap = None, 0
        for cand in candidates:
            overlap = len(text_toks & set(_tokens(cand)))
            if overlap > best_overlap:
                best, best_overlap = cand, overlap
        lines.append(f"{i}: {best if best is not None else 'UNASSIGNED'}")
    return "\n".join(lines)


def _respond_judge(prompt: str) -> str:
    text = re.search(r"(?m)^Text: (.*)$", prompt)
    cand = re.search(r"(?m)^Assigned [a-z]+: (.*)$", prompt)
    overlap = set(_tokens(text.group(1) if text else "")) & set(
        _tokens(cand.group(1) if cand else ""))
    if overlap:
        return "Yes. The assignment matches the text."
    return "No. The assignment is unrelated to the text."


def _respond_stance(prompt: str) -> str:
    fields = re.findall(r"(?m)^(?:Text|Theme): (.*)$", prompt)
    toks = Counter()
    for f in fields:
        toks.update(_tokens(f))
    climate = sum(c for t, c in toks.items() if t in _PRO_CLIMATE)
    energy = sum(c for t, c in toks.items() if t in _PRO_ENERGY)
    if climate > energy:
        return "Pro-Climate"
    if energy > climate:
        return "Pro-Energy"
    return "Neutral"


def heuristic_responder(prompt: str) -> str | None:
    if "Cluster Coherency" in prompt and "Paragraph 1:" in prompt:
        return _respond_coherency(prompt)
    if prompt.startswith("Summarize the following texts"):
        return _respond_summary(prompt)
    if prompt.startswith("Produce a short theme label"):
        return _respond_theme_label(prompt)
    if prompt.startswith("Assign each text below"):
        return _respond_assign(prompt)
    if prompt.startswith("Decide whether the assigned"):
        return _respond_judge(prompt)
    if prompt.startswith("Classify the stance") or "Stance:" in prompt:
        return _respond_stance(prompt)
    return None
