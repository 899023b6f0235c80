"""End-to-end theme discovery: coherency filter, summaries, tau-grid
merging, labeling, and corpus-wide assignment, with stage checkpoints.

Stages run in a fixed order (embed, pca, umap, cluster, representatives,
coherency, summarize, merge, label); each writes one JSON checkpoint under
the run directory so a failed run resumes where it stopped.  With the mock
providers every artifact is byte-stable for a fixed config fingerprint.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .clustering import (
    NOISE,
    ClusterAssignment,
    hdbscan_cluster,
    select_representatives,
    validity_report,
)
from .config import DEFAULT_TAU_GRID, PipelineConfig
from .corpus import Corpus
from .embedding import (
    HashEmbeddingProvider,
    RemoteEmbeddingProvider,
    VectorCache,
    VectorSet,
    cosine_similarity,
    embed_batch,
    l2_normalize,
)
from .llmgateway import (
    UNASSIGNED,
    CachingChatClient,
    Verdict,
    assign_batch,
    check_coherency,
    label_theme,
    offline_client,
    run_concurrently,
    summarize_cluster,
)
from .llmgateway.clients import RemoteChatClient
from .projection import UmapConfig, pca_fit_transform, umap_fit_transform
from .rundir import RunDirectory, StageError, canonical_json

log = logging.getLogger(__name__)

STAGES = ("embed", "pca", "umap", "cluster", "representatives",
          "coherency", "summarize", "merge", "label")


class PipelineError(RuntimeError):
    pass


@dataclass(frozen=True)
class ThemeCluster:
    cluster_id: int
    member_ids: tuple[str, ...]
    representative_ids: tuple[str, ...]   # at most 5
    summary: str
    theme_label: str
    merged_from: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "cluster_id": self.cluster_id,
            "member_ids": list(self.member_ids),
            "representative_ids": list(self.representative_ids),
            "summary": self.summary,
            "theme_label": self.theme_label,
            "merged_from": list(self.merged_from),
        }


@dataclass(frozen=True)
class ThemeModel:
    clusters: tuple[ThemeCluster, ...]
    config_fingerprint: str
    corpus_ref: str

    def __post_init__(self):
        folded = [c.theme_label.casefold() for c in self.clusters]
        if len(set(folded)) != len(folded):
            dupes = sorted({x for x in folded if folded.count(x) > 1})
            raise PipelineError(f"duplicate theme labels: {dupes}")
        seen: set[int] = set()
        for c in self.clusters:
            if not c.merged_from:
                raise PipelineError("merged_from must be non-empty")
            overlap = seen & set(c.merged_from)
            if overlap:
                raise PipelineError(
                    f"cluster ids {sorted(overlap)} in two merged groups")
            seen.update(c.merged_from)

    def labels(self) -> list[str]:
        return [c.theme_label for c in self.clusters]

    def summaries(self) -> list[str]:
        return [c.summary for c in self.clusters]

    def to_json(self) -> str:
        return canonical_json({
            "schema_version": 1,
            "config_fingerprint": self.config_fingerprint,
            "corpus_ref": self.corpus_ref,
            "clusters": [c.to_dict() for c in self.clusters],
        })

    @classmethod
    def from_json(cls, text: str) -> "ThemeModel":
        body = json.loads(text)
        clusters = tuple(
            ThemeCluster(
                cluster_id=c["cluster_id"],
                member_ids=tuple(c["member_ids"]),
                representative_ids=tuple(c["representative_ids"]),
                summary=c["summary"],
                theme_label=c["theme_label"],
                merged_from=tuple(c["merged_from"]),
            )
            for c in body["clusters"])
        return cls(clusters, body["config_fingerprint"], body["corpus_ref"])


@dataclass(frozen=True)
class MergeConfig:
    tau_grid: tuple[float, ...] = DEFAULT_TAU_GRID
    selected_tau: Optional[float] = None

    def __post_init__(self):
        if not self.tau_grid:
            raise PipelineError("tau_grid must be non-empty")
        if list(self.tau_grid) != sorted(self.tau_grid):
            raise PipelineError("tau_grid must be sorted ascending")
        if self.selected_tau is not None and self.selected_tau not in self.tau_grid:
            raise PipelineError("selected_tau must be a grid member")


@dataclass(frozen=True)
class ThemeAssignment:
    doc_ids: tuple[str, ...]
    labels: tuple[str, ...]        # theme label or UNASSIGNED
    strategy: str
    model_fingerprint: str
    model_labels: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.doc_ids) != len(self.labels):
            raise PipelineError("doc_ids and labels length mismatch")
        if self.model_labels:
            valid = set(self.model_labels) | {UNASSIGNED}
            bad = [l for l in self.labels if l not in valid]
            if bad:
                raise PipelineError(f"labels not in the model: {sorted(set(bad))}")

    def label_of(self, doc_id: str) -> str:
        return self.labels[self.doc_ids.index(doc_id)]

    def n_unassigned(self) -> int:
        return sum(1 for l in self.labels if l == UNASSIGNED)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["id", "theme_label", "strategy"])
        for doc_id, label in zip(self.doc_ids, self.labels):
            writer.writerow([doc_id, label, self.strategy])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, model_fingerprint: str = "",
                 model_labels: tuple[str, ...] = ()) -> "ThemeAssignment":
        rows = list(csv.reader(io.StringIO(text)))
        strategy = rows[1][2] if len(rows) > 1 else "SUMMARY_MEDIATED"
        return cls(tuple(r[0] for r in rows[1:]),
                   tuple(r[1] for r in rows[1:]),
                   strategy, model_fingerprint, model_labels)


def filter_coherent(clusters: Sequence[tuple[int, list[str]]], gateway,
                    fewshots=None, max_in_flight: int = 4):
    """Keep clusters judged COHERENT; audit every verdict.

    ``clusters`` is a sequence of (cluster_id, representative_texts).
    Returns (retained_ids, audit_log).
    """
    from .llmgateway import DEFAULT_COHERENCY_FEWSHOTS

    shots = fewshots if fewshots is not None else DEFAULT_COHERENCY_FEWSHOTS

    def judge(entry):
        cid, reps = entry
        verdict = check_coherency(gateway, reps, shots)
        return {"cluster_id": cid, "verdict": verdict.verdict.value,
                "reasoning": verdict.reasoning}

    audit = run_concurrently(judge, list(clusters), max_in_flight)
    retained = [a["cluster_id"] for a in audit
                if a["verdict"] == Verdict.COHERENT.value]
    if not retained:
        log.warning("all %d clusters judged incoherent", len(audit))
    return retained, audit


def merge_redundant(summary_vectors: np.ndarray, tau: float) -> list[list[int]]:
    """Connected components of the pairwise-cosine >= tau graph.

    Groups are ordered by smallest member index; members ascend.
    """
    if not 0.0 < tau < 1.0:
        raise PipelineError(f"tau {tau} outside (0, 1)")
    mat = np.asarray(summary_vectors, dtype=np.float64)
    n = mat.shape[0]
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if cosine_similarity(mat[i], mat[j]) >= tau:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [sorted(groups[r]) for r in sorted(groups)]


def tau_grid_search(merge_cfg: MergeConfig, summary_vectors: np.ndarray,
                    reduced_doc_vectors: np.ndarray,
                    base_assignment: ClusterAssignment,
                    cluster_ids: Optional[Sequence[int]] = None,
                    ) -> tuple[MergeConfig, list[dict]]:
    """Score each tau by merged-label silhouette/DBI on the reduced vectors.

    Selection: max silhouette, then min DBI, then max tau.  A tau that
    collapses everything into one group is scored invalid and skipped.
    """
    n_clusters = np.asarray(summary_vectors).shape[0]
    if n_clusters < 2:
        raise PipelineError("grid search needs at least 2 clusters")
    ids = list(cluster_ids) if cluster_ids is not None else list(range(n_clusters))
    labels = np.asarray(base_assignment.labels)
    table: list[dict] = []
    best = None
    for tau in merge_cfg.tau_grid:
        groups = merge_redundant(summary_vectors, tau)
        row = {"tau": tau, "n_groups": len(groups), "valid": False,
               "silhouette": None, "davies_bouldin": None}
        if len(groups) >= 2:
            group_of = {}
            for gi, members in enumerate(groups):
                for m in members:
                    group_of[ids[m]] = gi
            merged = np.full(labels.shape, NOISE, dtype=np.int64)
            for lab, gi in group_of.items():
                merged[labels == lab] = gi
            present = np.unique(merged[merged != NOISE])
            if present.size >= 2:
                # Compact to 0..K-1 so the metrics see a contiguous range.
                remap = {int(g): i for i, g in enumerate(present)}
                compact = np.array(
                    [remap.get(int(v), NOISE) for v in merged], dtype=np.int64)
                rep = validity_report(reduced_doc_vectors, compact)
                row.update(valid=True, silhouette=rep.silhouette,
                           davies_bouldin=rep.davies_bouldin)
                key = (-rep.silhouette, rep.davies_bouldin, -tau)
                if best is None or key < best[0]:
                    best = (key, tau)
        table.append(row)
    if best is None:
        raise PipelineError("no tau in the grid produced >= 2 merged groups")
    return MergeConfig(merge_cfg.tau_grid, best[1]), table


@dataclass
class Providers:
    """The embedding and chat backends a run is wired to."""
    document_embedder: object
    summary_embedder: object
    chat: object
    cache: Optional[VectorCache] = None

    @classmethod
    def from_config(cls, cfg: PipelineConfig) -> "Providers":
        if cfg.embed_provider == "hash":
            doc = HashEmbeddingProvider(dim=cfg.embed_dim, name="hash-doc")
            summ = HashEmbeddingProvider(dim=cfg.summary_embed_dim,
                                         name="hash-summary")
        elif cfg.embed_provider == "remote":
            doc = RemoteEmbeddingProvider(dim=cfg.embed_dim, name="remote-doc")
            summ = RemoteEmbeddingProvider(dim=cfg.summary_embed_dim,
                                           name="remote-summary")
        else:
            raise PipelineError(f"unknown embed provider {cfg.embed_provider!r}")
        if cfg.chat_provider == "mock":
            chat = CachingChatClient(offline_client())
        elif cfg.chat_provider == "remote":
            chat = CachingChatClient(RemoteChatClient(model=cfg.chat_model))
        else:
            raise PipelineError(f"unknown chat provider {cfg.chat_provider!r}")
        cache = VectorCache(cfg.cache_dir) if cfg.cache_dir else None
        return cls(doc, summ, chat, cache)


def _stage(run: RunDirectory, name: str, compute, resume: bool):
    if resume:
        cached = run.load_checkpoint(name)
        if cached is not None:
            return cached
    try:
        payload = compute()
    except Exception as exc:
        raise StageError(name, exc) from exc
    run.write_checkpoint(name, payload)
    return payload


def _vectors_from_payload(payload):
    return VectorSet(tuple(payload["ids"]),
                     np.asarray(payload["matrix"], dtype=np.float64),
                     payload["fingerprint"])


def _vectors_payload(vs: VectorSet) -> dict:
    return {"ids": list(vs.ids), "matrix": vs.matrix.tolist(),
            "fingerprint": vs.provider_fingerprint}


def run_discovery(corpus: Corpus, providers: Providers, cfg: PipelineConfig,
                  run: RunDirectory, resume: bool = False) -> ThemeModel:
    """Execute the full discovery pipeline with per-stage checkpoints."""
    if len(corpus) == 0:
        raise PipelineError("corpus is empty")
    texts = corpus.texts()
    ids = corpus.ids()

    def compute_embed():
        vs = embed_batch(providers.document_embedder, texts, ids,
                         cache=providers.cache)
        return _vectors_payload(l2_normalize(vs))

    embed_pay = _stage(run, "embed", compute_embed, resume)

    def compute_pca():
        vs = _vectors_from_payload(embed_pay)
        n_comp = min(cfg.pca_components, len(vs) - 1, vs.dim)
        _, reduced = pca_fit_transform(vs, n_comp)
        out = _vectors_payload(reduced)
        out["n_components"] = n_comp
        return out

    pca_pay = _stage(run, "pca", compute_pca, resume)

    def compute_umap():
        vs = _vectors_from_payload(pca_pay)
        base = dict(target_dim=cfg.umap_dim, n_neighbors=cfg.umap_neighbors,
                    min_dist=cfg.umap_min_dist, n_epochs=cfg.umap_epochs,
                    seed=cfg.seed)
        reduced = umap_fit_transform(vs, UmapConfig(**base))
        plot = umap_fit_transform(vs, UmapConfig(**{**base, "target_dim": 2}))
        return {"reduced": _vectors_payload(reduced),
                "plot2d": _vectors_payload(plot)}

    umap_pay = _stage(run, "umap", compute_umap, resume)

    def compute_cluster():
        vs = _vectors_from_payload(umap_pay["reduced"])
        assignment = hdbscan_cluster(vs, cfg.hdbscan_min_cluster_size,
                                     cfg.hdbscan_min_samples)
        return {"labels": assignment.labels.tolist(),
                "probabilities": assignment.probabilities.tolist(),
                "n_clusters": assignment.n_clusters}

    cluster_pay = _stage(run, "cluster", compute_cluster, resume)
    assignment = ClusterAssignment(
        np.asarray(cluster_pay["labels"], dtype=np.int64),
        np.asarray(cluster_pay["probabilities"], dtype=np.float64),
        cluster_pay["n_clusters"])
    if assignment.n_clusters == 0:
        raise PipelineError("clustering produced no clusters; corpus too "
                            "small for the configured min_cluster_size")

    def compute_representatives():
        reps = select_representatives(assignment, corpus,
                                      cfg.representatives_k)
        return {str(cid): [d.id for d in docs] for cid, docs in reps.items()}

    reps_pay = _stage(run, "representatives", compute_representatives, resume)
    text_of = dict(zip(ids, texts))
    rep_texts = {int(cid): [text_of[i] for i in rep_ids]
                 for cid, rep_ids in reps_pay.items()}

    def compute_coherency():
        entries = sorted(rep_texts.items())
        retained, audit = filter_coherent(entries, providers.chat,
                                          max_in_flight=cfg.max_in_flight)
        return {"retained": retained, "audit": audit}

    coherency_pay = _stage(run, "coherency", compute_coherency, resume)
    retained = list(coherency_pay["retained"])
    if not retained:
        raise PipelineError("no coherent clusters; nothing to model")

    def compute_summaries():
        def summarize(cid):
            return summarize_cluster(providers.chat, rep_texts[cid])

        summaries = run_concurrently(summarize, retained, cfg.max_in_flight)
        return {"summaries": {str(c): s for c, s in zip(retained, summaries)}}

    summ_pay = _stage(run, "summarize", compute_summaries, resume)
    summaries = {int(c): s for c, s in summ_pay["summaries"].items()}

    def compute_merge():
        ordered = sorted(summaries)
        vecs = embed_batch(providers.summary_embedder,
                           [summaries[c] for c in ordered],
                           [str(c) for c in ordered], cache=providers.cache)
        vecs = l2_normalize(vecs)
        reduced = np.asarray(umap_pay["reduced"]["matrix"], dtype=np.float64)
        if len(ordered) == 1:
            merge_cfg = MergeConfig(cfg.tau_grid, max(cfg.tau_grid))
            table = [{"tau": t, "n_groups": 1, "valid": False,
                      "silhouette": None, "davies_bouldin": None}
                     for t in cfg.tau_grid]
            groups = [[0]]
        else:
            merge_cfg, table = tau_grid_search(
                MergeConfig(cfg.tau_grid), vecs.matrix, reduced, assignment,
                cluster_ids=ordered)
            groups = merge_redundant(vecs.matrix, merge_cfg.selected_tau)
        return {"selected_tau": merge_cfg.selected_tau,
                "table": table,
                "groups": [[ordered[m] for m in g] for g in groups],
                "summary_vectors": _vectors_payload(vecs)}

    merge_pay = _stage(run, "merge", compute_merge, resume)

    def compute_label():
        groups = [list(map(int, g)) for g in merge_pay["groups"]]
        prob_of = {ids[n]: float(assignment.probabilities[n])
                   for n in range(len(ids))}
        order_of = {doc_id: n for n, doc_id in enumerate(ids)}
        members_of = {
            cid: [ids[n] for n in assignment.members(cid)]
            for cid in sorted(summaries)
        }
        clusters = []
        used_labels: dict[str, int] = {}
        for gid, group in enumerate(groups):
            rep_ids = sorted(
                {r for cid in group for r in reps_pay[str(cid)]},
                key=lambda r: (-prob_of[r], r))[:cfg.representatives_k]
            if len(group) == 1:
                summary = summaries[group[0]]
            else:
                summary = summarize_cluster(
                    providers.chat, [text_of[r] for r in rep_ids])
            label = label_theme(providers.chat, summary)
            if label.casefold() in used_labels:
                exclusions = ", ".join(sorted(used_labels))
                retry = label_theme(
                    providers.chat,
                    summary + f" (distinct from: {exclusions})")
                if retry.casefold() in used_labels:
                    raise PipelineError(
                        f"could not produce a unique label for group {gid}; "
                        f"got duplicate {label!r}")
                label = retry
            used_labels[label.casefold()] = gid
            member_ids = [i for cid in group for i in members_of[cid]]
            member_ids.sort(key=order_of.__getitem__)
            clusters.append({
                "cluster_id": gid,
                "member_ids": member_ids,
                "representative_ids": rep_ids,
                "summary": summary,
                "theme_label": label,
                "merged_from": sorted(group),
            })
        return {"clusters": clusters}

    label_pay = _stage(run, "label", compute_label, resume)
    model = ThemeModel(
        clusters=tuple(
            ThemeCluster(
                cluster_id=c["cluster_id"],
                member_ids=tuple(c["member_ids"]),
                representative_ids=tuple(c["representative_ids"]),
                summary=c["summary"],
                theme_label=c["theme_label"],
                merged_from=tuple(c["merged_from"]),
            ) for c in label_pay["clusters"]),
        config_fingerprint=run.fingerprint,
        corpus_ref=corpus.source_name,
    )
    (run.path / "theme_model.json").write_text(model.to_json(),
                                               encoding="utf-8")
    return model


def assign_corpus(corpus: Corpus, model: ThemeModel, strategy: str,
                  gateway, batch_size: int = 10,
                  max_in_flight: int = 4) -> ThemeAssignment:
    """Assign every document to a theme (or UNASSIGNED) in batches."""
    if not model.clusters:
        raise PipelineError("theme model is empty")
    if strategy == "SUMMARY_MEDIATED":
        candidates = model.summaries()
        mode = "SUMMARY"
    elif strategy == "DIRECT_THEME":
        candidates = model.labels()
        mode = "THEME"
    else:
        raise PipelineError(f"unknown strategy {strategy!r}")
    theme_of_candidate = model.labels()
    texts = corpus.texts()
    batches = [list(range(s, min(s + batch_size, len(texts))))
               for s in range(0, len(texts), batch_size)]

    def assign(batch):
        try:
            return assign_batch(gateway, [texts[i] for i in batch],
                                candidates, mode)
        except Exception as exc:
            log.warning("assignment batch failed (%s); marking %d texts "
                        "UNASSIGNED", exc, len(batch))
            return [None] * len(batch)

    results = run_concurrently(assign, batches, max_in_flight)
    labels: list[str] = [UNASSIGNED] * len(texts)
    for batch, picks in zip(batches, results):
        for i, pick in zip(batch, picks):
            if pick is not None:
                labels[i] = theme_of_candidate[pick]
    return ThemeAssignment(tuple(corpus.ids()), tuple(labels), strategy,
                           model.config_fingerprint,
                           tuple(model.labels()))
