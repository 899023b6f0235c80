"""Synthetic corpora with known topic structure for offline runs and tests.

Each topic owns a disjoint vocabulary; every document always contains its
topic's head token, so token-overlap heuristics (and the offline mock) can
recover the generating topic exactly.  Full-scale corpora from the original
platforms are not redistributable, so this is the demo and test substrate.
"""

from __future__ import annotations

import argparse
import datetime as dt
from pathlib import Path

import numpy as np

from .corpus import Corpus, Document, Platform, Stance, save_corpus

TOPICS = {
    "solar": ["solar", "panels", "rooftop", "inverter", "photovoltaic",
              "sunlight", "netmetering", "installer", "kilowatt", "rebate",
              "array", "module", "grid", "tracker", "silicon"],
    "fracking": ["fracking", "shale", "wellpad", "drilling", "methane",
                 "pipeline", "rig", "permit", "basin", "injection",
                 "flaring", "leases", "crude", "derrick", "barrels"],
    "wildfire": ["wildfire", "smoke", "evacuation", "firebreak", "embers",
                 "acres", "containment", "airquality", "fireline", "drought",
                 "canyon", "brush", "hydrant", "lookout", "retardant"],
    "oceans": ["ocean", "coral", "reef", "plankton", "acidification",
               "fisheries", "kelp", "tides", "mangrove", "seabird",
               "trawler", "estuary", "plastic", "buoys", "shoreline"],
}

_TEMPLATES = [
    "New report on {a} and {b} released this week, covering {c}.",
    "Why {a} matters: community groups discuss {b} and {c}.",
    "Local update: {a} project expands, with {b} and {c} in focus.",
    "Act now on {a}. Learn how {b} affects {c} near you.",
    "Briefing: {a}, {b}, and {c} shape this month's agenda.",
]

_STANCE_OF_TOPIC = {
    "solar": Stance.PRO_CLIMATE,
    "fracking": Stance.PRO_ENERGY,
    "wildfire": Stance.PRO_CLIMATE,
    "oceans": Stance.NEUTRAL,
}


def synthetic_corpus(n_docs: int = 600, topics: int = 3, seed: int = 7,
                     platform: Platform = Platform.PAID_ADS,
                     start: dt.date = dt.date(2024, 10, 1),
                     with_stances: bool = False,
                     source_name: str = "synthetic") -> tuple[Corpus, list[str]]:
    """Generate ``n_docs`` documents over ``topics`` topics.

    Returns (corpus, topic_labels) with topic_labels aligned to the corpus
    order, serving as generator ground truth.
    """
    rng = np.random.default_rng(seed)
    names = list(TOPICS)[:topics]
    docs = []
    truth = []
    for i in range(n_docs):
        topic = names[i % topics]
        vocab = TOPICS[topic]
        head = vocab[0]
        extra = rng.choice(vocab[1:], size=6, replace=False).tolist()
        template = _TEMPLATES[int(rng.integers(len(_TEMPLATES)))]
        text = template.format(a=head, b=extra[0], c=extra[1])
        text += " " + " ".join(sorted(extra[2:]))
        ts = dt.datetime.combine(
            start + dt.timedelta(days=int(rng.integers(0, 60))),
            dt.time(hour=int(rng.integers(0, 24))))
        impressions = int(rng.integers(100, 5000))
        spend = float(rng.integers(10, 500))
        docs.append(Document(
            id=f"doc{i:05d}",
            platform=platform,
            text=text,
            timestamp=ts,
            advertiser=f"org-{topic}" if platform is Platform.PAID_ADS else None,
            impressions_low=impressions,
            impressions_high=impressions * 2,
            spend_low=spend,
            spend_high=spend * 2,
            stance=_STANCE_OF_TOPIC[topic] if with_stances else None,
        ))
        truth.append(topic)
    order = sorted(range(n_docs), key=lambda i: (docs[i].timestamp, docs[i].id))
    corpus = Corpus(tuple(docs[i] for i in order), source_name=source_name)
    return corpus, [truth[i] for i in order]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Write a synthetic topic-structured corpus as JSONL.")
    parser.add_argument("--out", required=True, help="output JSONL path")
    parser.add_argument("--n-docs", type=int, default=600)
    parser.add_argument("--topics", type=int, default=3)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--platform", default="PAID_ADS",
                        choices=[p.value for p in Platform])
    parser.add_argument("--stances", action="store_true",
                        help="attach topic-derived stance labels")
    args = parser.parse_args(argv)
    corpus, _ = synthetic_corpus(
        n_docs=args.n_docs, topics=args.topics, seed=args.seed,
        platform=Platform(args.platform), with_stances=args.stances,
        source_name=Path(args.out).stem)
    save_corpus(corpus, args.out)
    print(f"wrote {len(corpus)} documents to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
