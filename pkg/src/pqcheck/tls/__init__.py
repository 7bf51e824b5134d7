"""Self-contained TLS 1.3 stack: record layer, client, and server."""

from . import client, common, context, record, server, wire  # noqa: F401
from .client import ClientSession, client_handshake  # noqa: F401
from .context import HandshakeConfig, TestContext  # noqa: F401
from .server import ServerCredential, ServerPolicy, server_handshake  # noqa: F401
