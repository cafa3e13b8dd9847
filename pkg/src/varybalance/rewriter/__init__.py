from .base import RewriteProvider, rewrite_k, rewrite_one
from .mock import IdentityRewriter, MockRewriter, mock_generate, mock_rewrite
from .remote import OpenAIChatRewriter

__all__ = [
    "IdentityRewriter",
    "MockRewriter",
    "OpenAIChatRewriter",
    "RewriteProvider",
    "mock_generate",
    "mock_rewrite",
    "rewrite_k",
    "rewrite_one",
]
