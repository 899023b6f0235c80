"""Gateway operations: coherency, summarization, labeling, assignment,
judging, and prompted stance prediction.

All operations are pure functions of the rendered prompt when the client is
deterministic.  Retry budgets are small and fixed; parsers are strict and
whole-word, so hallucinated candidates surface as UNASSIGNED rather than
being fuzzily matched.
"""

from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

from ..corpus import Stance
from .clients import ChatError, ParseError
from .prompts import load_template

log = logging.getLogger(__name__)

UNASSIGNED = "UNASSIGNED"


class Verdict(Enum):
    COHERENT = "COHERENT"
    INCOHERENT = "INCOHERENT"


@dataclass(frozen=True)
class CoherencyVerdict:
    verdict: Verdict
    reasoning: str = ""


@dataclass(frozen=True)
class CoherencyFewShot:
    paragraphs: tuple[str, ...]   # exactly 5
    labels: tuple[str, ...]       # one per paragraph
    verdict: Verdict
    reasoning: str


# Three coherent and three incoherent worked examples for the coherency
# prompt; the mixed-mining block is the canonical incoherent case.
DEFAULT_COHERENCY_FEWSHOTS: tuple[CoherencyFewShot, ...] = (
    CoherencyFewShot(
        paragraphs=(
            "Urges supporters to back community solar programs that cut "
            "power bills for low-income households.",
            "Promotes rooftop solar installation rebates available through "
            "a new state program.",
            "Highlights how solar farms on former industrial land create "
            "local construction jobs.",
            "Asks voters to protect net-metering rules that make home solar "
            "affordable.",
            "Announces a webinar on financing residential solar panels.",
        ),
        labels=("Supports solar adoption",) * 5,
        verdict=Verdict.COHERENT,
        reasoning="The cluster is coherent because all labels agree.",
    ),
    CoherencyFewShot(
        paragraphs=(
            "Copper has become the world's third most consumed metal, but "
            "uncertain demand levels and supply constraints have created a "
            "volatile outlook.",
            "Highlights widespread support for copper mining in Arizona, "
            "emphasizing its role in renewable energy, national security, "
            "and supply chain resilience.",
            "Describes the Kennecott Mine's long history, production levels, "
            "and contribution to sustainable technologies like wind turbines "
            "and electric vehicles.",
            "Discusses Alaska's Estelle Gold Project and its potential for "
            "gold and antimony production.",
            "Promotes mining in Minnesota as a modern STEM career, focusing "
            "on innovation in iron mining.",
        ),
        labels=("Against copper mining", "Supports copper mining",
                "Supports copper mining", "Promotes gold mining",
                "Supports iron mining"),
        verdict=Verdict.INCOHERENT,
        reasoning="The cluster is incoherent because the labels are "
                  "inconsistent.",
    ),
    CoherencyFewShot(
        paragraphs=(
            "Warns that unchecked warming will push coastal insurance "
            "markets into collapse.",
            "Describes families priced out of home insurance after repeated "
            "flood claims.",
            "Reports insurers withdrawing from wildfire-prone counties.",
            "Argues premiums now encode climate risk better than policy "
            "debates do.",
            "Calls for state-backed reinsurance as climate losses mount.",
        ),
        labels=("Climate risk and insurance",) * 5,
        verdict=Verdict.COHERENT,
        reasoning="The cluster is coherent because all labels agree.",
    ),
    CoherencyFewShot(
        paragraphs=(
            "Promotes an electric school bus pilot for a suburban district.",
            "Reviews a documentary about deep-sea mining robots.",
            "Advertises discounted season tickets for a minor-league team.",
            "Explains how to compost food scraps in small apartments.",
            "Urges donations for hurricane relief in the Gulf.",
        ),
        labels=("Electric transit", "Deep-sea mining", "Sports promotion",
                "Composting how-to", "Disaster relief"),
        verdict=Verdict.INCOHERENT,
        reasoning="The cluster is incoherent because the labels are "
                  "inconsistent.",
    ),
    CoherencyFewShot(
        paragraphs=(
            "Celebrates a record quarter for offshore wind installations.",
            "Profiles technicians retraining from rig work to turbine "
            "maintenance.",
            "Announces a port expansion to stage offshore wind components.",
            "Reports falling costs per megawatt for new wind farms.",
            "Backs legislation streamlining offshore wind permitting.",
        ),
        labels=("Supports offshore wind",) * 5,
        verdict=Verdict.COHERENT,
        reasoning="The cluster is coherent because all labels agree.",
    ),
    CoherencyFewShot(
        paragraphs=(
            "Recommends a podcast on regenerative agriculture.",
            "Criticizes a tax credit for carbon capture pipelines.",
            "Shares photos from a neighborhood creek cleanup.",
            "Promotes a sale on insulated winter jackets.",
            "Explains new rules for apartment recycling bins.",
        ),
        labels=("Farming media", "Against carbon capture subsidies",
                "Local stewardship", "Retail promotion", "Recycling rules"),
        verdict=Verdict.INCOHERENT,
        reasoning="The cluster is incoherent because the labels are "
                  "inconsistent.",
    ),
)


def _flatten(text: str) -> str:
    return " ".join(text.split())


def render_fewshots(fewshots: Sequence[CoherencyFewShot]) -> str:
    blocks = []
    for shot in fewshots:
        lines = [f"Paragraph {i}: {_flatten(p)}\nLabel: {lab}"
                 for i, (p, lab) in enumerate(zip(shot.paragraphs,
                                                  shot.labels), start=1)]
        verdict = shot.verdict.value.capitalize()
        blocks.append("\n".join(lines)
                      + f"\nCluster Coherency: {verdict}"
                      + f"\nReasoning: {shot.reasoning}")
    return "\n\n".join(blocks)


def _numbered_block(texts: Sequence[str]) -> str:
    return "\n".join(f"{i}. {_flatten(t)}" for i, t in enumerate(texts, 1))


def render_coherency_prompt(representatives: Sequence[str],
                            fewshots: Sequence[CoherencyFewShot]) -> str:
    reps = list(representatives)
    if not 1 <= len(reps) <= 5:
        raise ValueError(f"expected 1..5 representatives, got {len(reps)}")
    while len(reps) < 5:  # the template is written for exactly 5 paragraphs
        reps.append(reps[-1])
    slots = {f"text{i}": _flatten(t) for i, t in enumerate(reps, start=1)}
    return load_template("coherency").render(
        fewshots=render_fewshots(fewshots), **slots)


def parse_coherency(response: str) -> Optional[Verdict]:
    if re.search(r"\bincoherent\b", response, re.I):
        return Verdict.INCOHERENT
    if re.search(r"\bcoherent\b", response, re.I):
        return Verdict.COHERENT
    return None


def check_coherency(client, representatives: Sequence[str],
                    fewshots: Sequence[CoherencyFewShot] = DEFAULT_COHERENCY_FEWSHOTS,
                    ) -> CoherencyVerdict:
    prompt = render_coherency_prompt(representatives, fewshots)
    response = ""
    for _ in range(3):  # initial attempt plus 2 retries
        response = client.chat(prompt)
        verdict = parse_coherency(response)
        if verdict is not None:
            m = re.search(r"(?im)^reasoning:\s*(.*)$", response)
            return CoherencyVerdict(verdict, m.group(1).strip() if m else "")
    raise ParseError("no coherent/incoherent token found", response)


_SENTENCE_END = re.compile(r"(?<=[.!?])\s+")


def truncate_to_words(text: str, limit: int) -> str:
    """Cut at the last sentence boundary within ``limit`` words."""
    if len(text.split()) <= limit:
        return text
    kept: list[str] = []
    count = 0
    for sentence in _SENTENCE_END.split(text.strip()):
        words = sentence.split()
        if kept and count + len(words) > limit:
            break
        if not kept and len(words) > limit:
            return " ".join(words[:limit])
        kept.append(sentence.strip())
        count += len(words)
        if count >= limit:
            break
    return " ".join(kept)


def summarize_cluster(client, representatives: Sequence[str]) -> str:
    reps = [r for r in representatives if r.strip()]
    if not 1 <= len(reps) <= 5:
        raise ValueError(f"expected 1..5 non-empty texts, got {len(reps)}")
    prompt = load_template("summarize").render(texts=_numbered_block(reps))
    response = client.chat(prompt).strip()
    if not response:
        response = client.chat(
            prompt + "\nRespond with the summary only.").strip()
        if not response:
            raise ChatError("empty summary after retry")
    if len(response.split()) > 100:
        retry = client.chat(
            prompt + "\nThe previous summary was too long. Use at most "
            "100 words.").strip()
        if retry:
            response = retry
        response = truncate_to_words(response, 100)
    return response


_EDGE_PUNCT = "\"'`“”‘’.,;:!?()[]{}"


def normalize_label(raw: str) -> str:
    return raw.strip().strip(_EDGE_PUNCT).strip()


def _label_word_count(label: str) -> int:
    # Whitespace-separated words; hyphenated compounds count as one word.
    return len(label.split())


def _first_line(raw: str) -> str:
    stripped = raw.strip()
    return stripped.splitlines()[0] if stripped else ""


def label_theme(client, summary: str) -> str:
    if not summary.strip():
        raise ValueError("summary must be non-empty")
    prompt = load_template("theme_label").render(summary=_flatten(summary))
    label = normalize_label(_first_line(client.chat(prompt)))
    if label and 1 <= _label_word_count(label) <= 3:
        return label
    retry_raw = client.chat(
        prompt + "\nRespond with the 1-3 word label only.")
    label = normalize_label(_first_line(retry_raw))
    if label and 1 <= _label_word_count(label) <= 3:
        return label
    raise ParseError("label is not 1-3 words", retry_raw)


def parse_assignment_lines(response: str, n_texts: int,
                           candidates: Sequence[str]) -> Optional[list[Optional[int]]]:
    """Strict per-line parse; None if the cardinality is wrong."""
    entries: dict[int, str] = {}
    for line in response.splitlines():
        m = re.match(r"\s*(\d+)\s*[:.)-]\s*(.+)$", line)
        if m:
            entries[int(m.group(1))] = m.group(2).strip()
    if sorted(entries) != list(range(1, n_texts + 1)):
        return None
    folded = {c.casefold().strip(): i for i, c in enumerate(candidates)}
    out: list[Optional[int]] = []
    for i in range(1, n_texts + 1):
        value = entries[i].casefold().strip()
        out.append(folded.get(value))  # non-candidates become UNASSIGNED
    return out


def assign_batch(client, texts: Sequence[str], candidates: Sequence[str],
                 mode: str = "SUMMARY") -> list[Optional[int]]:
    """Per-text candidate index, or None for UNASSIGNED."""
    if not candidates:
        raise ValueError("candidates must be non-empty")
    if not 1 <= len(texts) <= 10:
        raise ValueError(f"batch size must be 1..10, got {len(texts)}")
    if mode not in ("SUMMARY", "THEME"):
        raise ValueError(f"unknown assignment mode {mode!r}")
    noun = "summary" if mode == "SUMMARY" else "theme"
    prompt = load_template("assign").render(
        mode_noun=noun,
        mode_noun_plural=noun.replace("ry", "ries") if noun == "summary"
        else "themes",
        candidates="\n".join(f"- {_flatten(c)}" for c in candidates),
        texts=_numbered_block(texts))
    response = ""
    for _ in range(3):  # initial attempt plus 2 retries
        response = client.chat(prompt)
        parsed = parse_assignment_lines(response, len(texts), candidates)
        if parsed is not None:
            return parsed
    log.warning("assignment batch unparseable after retries; marking all "
                "%d texts UNASSIGNED", len(texts))
    return [None] * len(texts)


def parse_judgment(response: str) -> Optional[bool]:
    if re.search(r"\b(incorrect|no)\b", response, re.I):
        return False
    if re.search(r"\b(correct|yes)\b", response, re.I):
        return True
    return None


def judge_assignment(client, text: str, candidate: str,
                     kind: str = "theme") -> Optional[bool]:
    """True/False, or None when the judge abstains (unparseable)."""
    if not text.strip() or not candidate.strip():
        raise ValueError("text and candidate must be non-empty")
    prompt = load_template("judge").render(
        kind=kind, text=_flatten(text), candidate=_flatten(candidate))
    for _ in range(2):
        verdict = parse_judgment(client.chat(prompt))
        if verdict is not None:
            return verdict
    return None


class StanceVariant(Enum):
    TXT = "TXT"
    THM = "THM"
    TXT_THM = "TXT_THM"


_STANCE_PATTERNS = (
    (Stance.PRO_CLIMATE, re.compile(r"pro[\s_-]?climate", re.I)),
    (Stance.PRO_ENERGY, re.compile(r"pro[\s_-]?energy", re.I)),
    (Stance.NEUTRAL, re.compile(r"\bneutral\b", re.I)),
)


def parse_stance(response: str) -> Optional[Stance]:
    for stance, pattern in _STANCE_PATTERNS:
        if pattern.search(response):
            return stance
    return None


def predict_stance_llm(client, text: Optional[str] = None,
                       theme: Optional[str] = None,
                       variant: StanceVariant = StanceVariant.TXT) -> Stance:
    if variant in (StanceVariant.TXT, StanceVariant.TXT_THM) and not text:
        raise ValueError(f"variant {variant.value} requires text")
    if variant in (StanceVariant.THM, StanceVariant.TXT_THM) and not theme:
        raise ValueError(f"variant {variant.value} requires theme")
    if variant is StanceVariant.TXT:
        prompt = load_template("stance_txt").render(text=_flatten(text))
    elif variant is StanceVariant.THM:
        prompt = load_template("stance_thm").render(theme=_flatten(theme))
    else:
        prompt = load_template("stance_txt_thm").render(
            text=_flatten(text), theme=_flatten(theme))
    response = ""
    for _ in range(2):
        response = client.chat(prompt)
        stance = parse_stance(response)
        if stance is not None:
            return stance
    raise ParseError("no stance token found", response)


def run_concurrently(fn, items, max_in_flight: int = 4) -> list:
    """Apply fn to items with a bounded worker pool; results keep order."""
    if max_in_flight <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        return list(pool.map(fn, items))
