"""Context-aware citation recommendation: BM25, hyperdoc2vec, LDA and stochastic rank fusion."""

__version__ = "0.1.0"
