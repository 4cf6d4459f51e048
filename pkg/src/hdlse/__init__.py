"""Active level-set estimation with MC-dropout neural surrogates."""
__version__ = "0.1.0"
