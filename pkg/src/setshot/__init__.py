"""setshot: unsupervised graph few-shot node classification.

Contrastive pretraining of node- and set-level embeddings on an unlabeled
graph, then episodic N-way K-shot evaluation where support embeddings are
calibrated onto the query distribution by entropic optimal transport.
"""

from .augment import AugmentConfig, drop_edges, mask_features, two_views
from .classifier import LinearClassifier, accuracy, predict, train_soft
from .config import RunConfig
from .contrastive import ContrastiveBatch, infonce_loss, paired_batch, similarity_matrix
from .data import (SbmSpec, export_embeddings, export_results, generate_sbm,
                   load_dataset, load_embeddings, save_dataset)
from .diagnostics import energy_distance, pca_project, shift_diagnostic
from .episodes import ClassSplit, Episode, one_hot_labels, sample_episode
from .graph import Graph, NormalizedAdjacency, normalize_adjacency, propagate
from .pipeline import (EncoderStack, build_embeddings, embedding_retrieval_purity,
                       meta_test, meta_train, run_episode, shift_report)
from .sets import (DeepSetsEncoder, RetrievalIndex, SetPair, build_final_embeddings,
                   build_set_batch, deepsets_encode, retrieval_purity,
                   split_halves, topk_cross_retrieve)
from .transport import TransportPlan, pairwise_cost, sinkhorn, transport_support

__version__ = "0.1.0"
