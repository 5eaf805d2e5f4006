"""qgdok: retrieval-grounded math practice-question generation at Webb's
Depth of Knowledge levels, with a built-in evaluation suite."""

from .corpus import ChunkingConfig, CorpusStore, DocumentChunk, SourceDocument, chunk_document
from .promptkit import DOK_LEVELS, DokLevel, GenerationMode, JudgeCriterion, dok_level
from .providers import MockChatProvider, MockEmbeddingProvider, ProviderConfig, mock_embed
from .retrieval import RetrievalHit, VectorIndex, cosine_similarity, index_chunks, search_topk

__version__ = "0.1.0"
