"""commprobe: detect organically-formed communities in a retweet corpus,
build per-community instruction-tuning datasets, measure how closely a tuned
model matches each community's voice, and screen community-aligned models
with the SWED eating-disorder questionnaire.
"""

__version__ = "0.1.0"
