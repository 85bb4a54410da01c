"""Toolkit for auditing moment-annotation bias in temporal sentence grounding benchmarks.

Pipeline: ingest annotation files into a canonical sample schema, fit a 2D
Gaussian KDE over normalized (start, end) moment locations, re-split the data
into training / val / test-iid / test-ood sets by density ranking, and score
moment predictions with plain and boundary-discounted recall.
"""

__version__ = "0.1.0"

from tsg_audit.ingest import Dataset, NormalizedMoment, Sample, normalize

__all__ = ["Dataset", "NormalizedMoment", "Sample", "normalize", "__version__"]
