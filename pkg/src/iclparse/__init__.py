"""Cache-accelerated in-context-learning log parser.

Stages: weighted density sampling of labeled candidates, progressive
0..K-shot training-data emission, online parsing through an LRU + pattern
cache with BM25-selected demonstrations, and PA/PTA/RTA evaluation.
"""

from .cache import CacheConfig, LruHit, Miss, PatternHit, TemplateCache, validate
from .core import LogRecord, ParseResult, Template, TokenizedLog, normalize, split_template, tokenize
from .evaluator import EvalReport, evaluate, parsing_accuracy, template_accuracy
from .llm_client import BackendConfig, HttpChatBackend, OracleBackend, PromptSpec, build_prompt, extract_template
from .metatrain import TrainingExample, emit
from .pipeline import LogParser
from .sampler import SampledSets, SamplerConfig, complexity, sample, weight
from .selector import Bm25Index, build_index

__version__ = "0.1.0"
