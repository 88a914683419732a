"""threatmon: streaming OSINT threat monitor.

Pipeline stages: normalize and filter short security posts, classify
relevance with a linear SVM or MLP, aggregate relevant posts into threat
clusters with a two-phase stream clusterer, and emit MISP-format indicators
of compromise. An HTTP API and label store close the analyst feedback loop.
"""

__version__ = "0.1.0"
