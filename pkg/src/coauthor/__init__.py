"""Human-in-the-loop engine for long-form scientific document drafting.

Pipeline: ingest references into sentence blocks, compress each document
into a research report, generate sections from expert outlines with batched
reference handling, trace every citation back to its source blocks, and
evaluate structure and content quality offline.
"""

__version__ = "0.1.0"
