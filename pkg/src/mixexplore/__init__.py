"""Interactive mixture-optimization engine.

Core pieces: dataset ingestion and simplex arithmetic, exact neighbor search,
a boosted-tree + kNN surrogate ensemble, SmoothGrad sensitivity, t-SNE
output-manifold embedding, interpolation paths, and a replayable session
workflow, all exposed over a FastAPI service and a CLI.
"""

__version__ = "0.1.0"
