"""LLM-backed agents: prompt templates, chat client, reply parsing."""
from .client import ChatClient, ChatEndpointConfig, TokenUsage, count_tokens_heuristic
from .parsing import AgentReply, parse_reply, validate_paths
from .prompts import render_prompt

__all__ = [
    "AgentReply",
    "ChatClient",
    "ChatEndpointConfig",
    "TokenUsage",
    "count_tokens_heuristic",
    "parse_reply",
    "render_prompt",
    "validate_paths",
]
