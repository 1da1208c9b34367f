"""seqlink: sequential cross-network identity linking.

Builds per-identity embeddings for two social graphs, then trains a
deterministic actor-critic agent that links identities one pair at a time,
feeding each match's outcome back into the next decision. Ships with
synthetic benchmark generation, ranking metrics, and reference baselines.
"""

__version__ = "0.1.0"
