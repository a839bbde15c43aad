"""Multi-vector dense retrieval with feedback-based query expansion.

Documents and queries are bags of per-token embeddings. First-pass
retrieval probes a coarse-quantized store per query embedding and scores
candidates with late-interaction maximum-similarity. The feedback
pipelines cluster the embeddings of the top-ranked documents, map each
cluster center to its most likely vocabulary token, keep the centers
whose tokens are rare across the collection, and use them as weighted
expansion embeddings, either rescoring the first-pass candidates or
retrieving anew with the expanded probe set.
"""

from .cluster import KMeansResult, kmeans
from .errors import (
    ConfigError,
    DimensionError,
    FormatError,
    MultivecError,
    UnknownDocumentError,
)
from .evaluation import (
    MetricReport,
    evaluate_run,
    holm_bonferroni,
    map_at,
    mrr_at,
    ndcg_at,
    paired_ttest,
    paired_ttest_holm,
    read_qrels,
    read_run,
    recall_at,
    write_run,
)
from .formats import DocRecord, read_cmve, read_id_map, write_cmve, write_id_map
from .index import (
    CoarseQuantizer,
    IndexBuildConfig,
    IndexedCorpus,
    build_index,
    load_index,
    save_index,
)
from .pipeline import (
    Centroid,
    ExpansionSet,
    FeedbackBag,
    PrfConfig,
    QueryEmbeddings,
    RankedList,
    build_expansion,
    colbert_e2e,
    collect_feedback,
    prf_rank,
    prf_rerank,
    select_expansion,
    token_likelihood,
)
from .scoring import expansion_bonus, maxsim, prf_score
from .synth import SynthSpec, gen_corpus

__version__ = "1.0.0"

__all__ = [
    "Centroid",
    "CoarseQuantizer",
    "ConfigError",
    "DimensionError",
    "DocRecord",
    "ExpansionSet",
    "FeedbackBag",
    "FormatError",
    "IndexBuildConfig",
    "IndexedCorpus",
    "KMeansResult",
    "MetricReport",
    "MultivecError",
    "PrfConfig",
    "QueryEmbeddings",
    "RankedList",
    "SynthSpec",
    "UnknownDocumentError",
    "build_expansion",
    "build_index",
    "colbert_e2e",
    "collect_feedback",
    "evaluate_run",
    "expansion_bonus",
    "gen_corpus",
    "holm_bonferroni",
    "kmeans",
    "load_index",
    "map_at",
    "maxsim",
    "mrr_at",
    "ndcg_at",
    "paired_ttest",
    "paired_ttest_holm",
    "prf_rank",
    "prf_rerank",
    "prf_score",
    "read_cmve",
    "read_id_map",
    "read_qrels",
    "read_run",
    "recall_at",
    "save_index",
    "select_expansion",
    "token_likelihood",
    "write_cmve",
    "write_id_map",
    "write_run",
]
