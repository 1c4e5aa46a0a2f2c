"""Urban-identity evaluation platform.

Manages perceptual-evaluation studies of synthetic urban video sequences:
study configuration and validation, staged participant sessions, response
collection, and the identity analytics computed from responses (familiarity
and accuracy rates, per-area identity levels, rank-divergence markers, and
lexicon-based semantic element analysis).
"""

__version__ = "0.1.0"
