"""pqcheck: post-quantum TLS 1.3 validation toolkit."""

__version__ = "0.1.0"
