"""semlink: deterministic simulator of importance-guided, keystream-
encrypted OFDM transmission of semantic feature maps."""

__version__ = "0.1.0"
