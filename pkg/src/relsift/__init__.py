"""relsift: human-in-the-loop relevance filtering for short social-media texts.

Pipeline: record ingestion and normalization -> binary bag-of-ngrams features
-> linear max-margin classifier -> uncertainty-sampling active learning with a
kappa-stabilization stopping rule -> confidence-threshold filtering with
statistical diagnostics. An annotation service and CLI wire it together.
"""

__version__ = "0.1.0"
