"""Handshake configuration and the negotiated-session record (TestContext)."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..crypto.kdf import KeySchedule
from ..pki.x509 import CertificateView
from .record import RecordCounters


@dataclass
class AlertRecord:
    level: int  # 1 warning, 2 fatal
    description: int
    direction: str  # sent | received

    def __str__(self) -> str:
        from .wire import ALERT_NAMES
        name = ALERT_NAMES.get(self.description, "unknown")
        return f"level={self.level}, description={self.description} ({name}, {self.direction})"


@dataclass
class ClientCredential:
    chain_der: list[bytes]
    scheme_id: int
    private_key: bytes


@dataclass
class ResumptionTicket:
    ticket: bytes
    psk: bytes
    hash_name: str
    cipher_suite: int
    age_add: int


@dataclass
class HandshakeConfig:
    offered_groups: list[int]
    offered_sig_schemes: list[int]
    cipher_suites: list[int]
    sni: str = ""
    alpn: list[str] = field(default_factory=lambda: ["h2"])
    client_credential: ClientCredential | None = None
    trust_anchors: list[CertificateView] | None = None
    verify_chain: bool = False
    timeout_ms: int = 5000
    share_count: int = 2  # key shares generated for the top N offered groups
    expected_name: str = ""
    offer_tls13: bool = True  # False = legacy-version offer (downgrade probe)
    legacy_version: int = 0x0303
    record_version: int = 0x0303
    resumption: ResumptionTicket | None = None
    store_ticket: bool = True
    compression_methods: bytes = b"\x00"

    def __post_init__(self):
        if not self.offered_groups or not self.offered_sig_schemes or not self.cipher_suites:
            raise ValueError("offered groups / schemes / suites must be nonempty")


@dataclass
class Timings:
    keygen_us: int = 0
    encap_us: int = 0
    decap_us: int = 0
    sign_us: int = 0
    verify_us: int = 0
    handshake_total_ms: float = 0.0


@dataclass
class TestContext:
    """Everything observed during one negotiated handshake."""

    target: str = ""
    successful: bool = False
    failure: str = ""
    alert: AlertRecord | None = None

    tls_version: int | None = None
    cipher_suite: int | None = None
    key_exchange_group: int | None = None
    signature_scheme: int | None = None
    client_random: bytes = b""
    server_random: bytes = b""
    key_schedule: KeySchedule | None = None
    client_public_key: bytes = b""
    server_key_share: bytes = b""
    kem_ciphertext: bytes = b""
    signature_size: int = 0
    timings: Timings = field(default_factory=Timings)
    counters: RecordCounters = field(default_factory=RecordCounters)
    cert_chain: list[CertificateView] = field(default_factory=list)
    cert_chain_der: list[bytes] = field(default_factory=list)
    chain_findings: list[str] = field(default_factory=list)
    alpn_result: str | None = None
    server_name: str = ""
    mutual_tls: bool = False
    certificate_request_seen: bool = False
    raw_client_hello: bytes = b""
    raw_server_hello: bytes = b""
    hello_retry: bool = False
    resumed: bool = False
    ticket: ResumptionTicket | None = None
    shared_secret_size: int = 0
    session: object | None = None  # live ClientSession for post-handshake I/O
