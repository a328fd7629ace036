"""Bayesian n-gram language models with compound-aware word generation.

Three model families share one vocabulary/corpus layer and one evaluation
suite:

* ``HPYLM``   hierarchical Pitman-Yor n-gram model trained by collapsed Gibbs
* ``HPYLMC``  the same with word-level restaurants whose base distribution is
  head-given-context times a head-conditioned modifier bigram model
* ``MKN``     interpolated modified Kneser-Ney baseline
"""

from .corpus import Corpus, Vocabulary, build_vocabulary, read_sentences, ngram_stream
from .crp import Restaurant, PypParams, log_joint_seating
from .segmentation import SegmentationDictionary, load_dictionary, build_component_vocabulary
from .hpylm import HPYLM
from .hpylmc import HPYLMC
from .mkn import MKN
from .evaluation import EvalReport, perplexity, breakdown, margin_ranking

__version__ = "0.1.0"

__all__ = [
    "Corpus", "Vocabulary", "build_vocabulary", "read_sentences", "ngram_stream",
    "Restaurant", "PypParams", "log_joint_seating",
    "SegmentationDictionary", "load_dictionary", "build_component_vocabulary",
    "HPYLM", "HPYLMC", "MKN",
    "EvalReport", "perplexity", "breakdown", "margin_ranking",
]
