"""Photographer similarity: Earth Mover's Distance and t-SNE embeddings."""

from archive_lens.similarity.photographers import (
    DistanceMatrix, build_signatures, photographer_distance_matrix,
)
from archive_lens.similarity.transport import (
    FlowSolution, Signature, TransportationSimplex, emd, ground_distances,
    solve_transportation, verify_optimality,
)
from archive_lens.similarity.tsne import (
    TSNE, EmbeddingConfig, EmbeddingResult, embed_features, tsne_embed,
)
