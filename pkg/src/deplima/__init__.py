"""deplima: configurable multilingual text analysis pipelines.

A pipeline is an ordered list of processing units running over shared
analysis data whose central layer is a token-lattice graph. Trainable units
cover segmentation, morphological tagging, dependency parsing,
lemmatization, and named entity recognition; rule-based NER and CoNLL-U
input/output round out the six built-in pipelines.
"""

__version__ = "0.1.0"
