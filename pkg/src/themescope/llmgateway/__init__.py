from .clients import (
    CachingChatClient,
    ChatError,
    MockChatClient,
    ParseError,
    RemoteChatClient,
    prompt_hash,
)
from .mock import heuristic_responder
from .ops import (
    DEFAULT_COHERENCY_FEWSHOTS,
    UNASSIGNED,
    CoherencyFewShot,
    CoherencyVerdict,
    StanceVariant,
    Verdict,
    assign_batch,
    check_coherency,
    judge_assignment,
    label_theme,
    predict_stance_llm,
    run_concurrently,
    summarize_cluster,
)
from .prompts import PromptTemplate, TemplateError, load_template, template_versions

__all__ = [
    "CachingChatClient", "ChatError", "MockChatClient", "ParseError",
    "RemoteChatClient", "prompt_hash", "heuristic_responder",
    "DEFAULT_COHERENCY_FEWSHOTS", "UNASSIGNED", "CoherencyFewShot",
    "CoherencyVerdict", "StanceVariant", "Verdict", "assign_batch",
    "check_coherency", "judge_assignment", "label_theme",
    "predict_stance_llm", "run_concurrently", "summarize_cluster",
    "PromptTemplate", "TemplateError", "load_template", "template_versions",
    "offline_client",
]


def offline_client(**kwargs) -> MockChatClient:
    """Mock client backed by the heuristic responder; fully offline."""
    return MockChatClient(responder=heuristic_responder, **kwargs)
