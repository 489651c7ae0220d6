"""Mention-pair coreference resolution for Indonesian text.

CNN/FCN mention-pair and singleton classifiers built on a small numpy
network engine, greedy best-first clustering, and MUC/B-cubed/CEAF_e scoring.
"""

__version__ = "0.1.0"
