"""Reference PQ-TLS 1.3 endpoint for interop tests and self-validation.

A configurable server whose misbehavior flags reproduce, one per flag, the
silent failure modes the validator must detect. The strict profile (all
flags off) passes every compliance and fuzz check. Misbehaviors are policy
hooks layered on the shared TLS server state machine, not forked protocol
code.
"""

from __future__ import annotations

import json
import socket
import threading
import uuid
from dataclasses import dataclass, fields

import click

from .compliance import h2 as h2mod
from .crypto import sig as sigmod
from .pki import x509
from .tls.server import ServerCredential, ServerPolicy, server_handshake

DEFAULT_GROUP_PREFERENCE = [0x11EC, 0x0768, 0x11ED, 0x1024, 0x001D, 0x0017]
DEFAULT_SANS = ["localhost"]
SHORT_SANS = ["udm", "coran-udm-service", "udm.localdomain"]


@dataclass
class MisbehaviorFlags:
    no_cert_request: bool = False
    classical_fallback: bool = False
    classical_sig_on_pq_kex: bool = False
    leaf_only_chain: bool = False
    short_san: bool = False
    allow_tls12_offer_acceptance: bool = False
    accept_duplicate_ch: bool = False
    ambiguous_renegotiation: bool = False
    weak_cipher_acceptance: bool = False
    missing_nf_type_in_profile: bool = False

    @classmethod
    def flag_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def provision_chain(scheme: sigmod.SigAlgorithm, sans: list[str],
                    issuer_name: str = "pqcheck reference root") -> ServerCredential:
    """Self-provisioned chain: one root CA + one leaf for the given scheme."""
    root_pair = sigmod.keygen(scheme)
    leaf_pair = sigmod.keygen(scheme)
    root_der = x509.build_certificate(issuer_name, [], 3650, root_pair, is_ca=True)
    leaf_der = x509.build_certificate(
        sans[0] if sans else "pqcheck-endpoint", sans, 825, root_pair,
        subject_public_key=leaf_pair.public_key, subject_key_alg=leaf_pair.alg,
        issuer=issuer_name)
    return ServerCredential(scheme, [leaf_der, root_der], leaf_pair.private_key)


def make_nrf_handler(flags: MisbehaviorFlags, fqdn: str):
    instance_id = str(uuid.uuid4())

    def profile_body() -> bytes:
        profile = {
            "nfInstanceId": instance_id,
            "nfStatus": "REGISTERED",
            "fqdn": fqdn or "nrf.test-5gc.svc.cluster.local",
            "plmnList": [{"mcc": "001", "mnc": "01"}],
        }
        if not flags.missing_nf_type_in_profile:
            profile["nfType"] = "NRF"
        return json.dumps([profile]).encode()

    def handler(layer, buffer: bytes, record):
        if buffer.startswith(h2mod.PREFACE[: len(buffer)]) and len(buffer) < len(h2mod.PREFACE):
            return buffer  # wait for the rest of the preface
        if buffer.startswith(h2mod.PREFACE):
            buffer = buffer[len(h2mod.PREFACE):]
            layer.write_record(23, h2mod.frame(h2mod.FRAME_SETTINGS, 0, 0, b""))
        frames, leftover = h2mod.parse_frames(buffer)
        for ftype, frame_flags, stream_id, payload in frames:
            if ftype == h2mod.FRAME_SETTINGS and not frame_flags & h2mod.FLAG_ACK:
                layer.write_record(23, h2mod.frame(h2mod.FRAME_SETTINGS,
                                                   h2mod.FLAG_ACK, 0, b""))
            elif ftype == h2mod.FRAME_HEADERS:
                try:
                    headers = dict(h2mod.decode_headers(payload, []))
                except h2mod.H2Error:
                    headers = {}
                path = headers.get(":path", "/")
                if path == "/nnrf-nfm/v1/nf-instances":
                    body = profile_body()
                    resp = h2mod.encode_headers([
                        (":status", "200"), ("content-type", "application/json")])
                else:
                    body = b"{}"
                    resp = h2mod.encode_headers([(":status", "404")])
                layer.write_record(23, h2mod.frame(
                    h2mod.FRAME_HEADERS, h2mod.FLAG_END_HEADERS, stream_id, resp))
                layer.write_record(23, h2mod.frame(
                    h2mod.FRAME_DATA, h2mod.FLAG_END_STREAM, stream_id, body))
            elif ftype == h2mod.FRAME_GOAWAY:
                return None
        return leftover

    return handler


class ReferenceEndpoint:
    """Accept loop + per-connection handshake threads; misbehaviors immutable."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0,
                 flags: MisbehaviorFlags | None = None,
                 credentials: dict[int, ServerCredential] | None = None,
                 sans: list[str] | None = None,
                 fqdn: str = "",
                 nrf_stub: bool = False,
                 schemes: list[int] | None = None,
                 require_client_cert: bool = True,
                 group_preference: list[int] | None = None):
        self.flags = flags or MisbehaviorFlags()
        self.fqdn = fqdn
        if sans is None:
            sans = SHORT_SANS if self.flags.short_san else (
                [fqdn] if fqdn else DEFAULT_SANS)
        elif self.flags.short_san:
            sans = SHORT_SANS
        if credentials is None:
            credentials = {}
            for scheme_id in (schemes or [sigmod.MLDSA65.id]):
                scheme = sigmod.lookup(scheme_id)
                credentials[scheme.id] = provision_chain(scheme, sans)
        self.policy = ServerPolicy(
            credentials=credentials,
            group_preference=list(group_preference or DEFAULT_GROUP_PREFERENCE),
            require_client_cert=require_client_cert,
            no_cert_request=self.flags.no_cert_request,
            classical_fallback=self.flags.classical_fallback,
            classical_sig_on_pq_kex=self.flags.classical_sig_on_pq_kex,
            leaf_only_chain=self.flags.leaf_only_chain,
            allow_tls12_offer_acceptance=self.flags.allow_tls12_offer_acceptance,
            accept_duplicate_ch=self.flags.accept_duplicate_ch,
            ambiguous_renegotiation=self.flags.ambiguous_renegotiation,
            weak_cipher_acceptance=self.flags.weak_cipher_acceptance,
        )
        if self.flags.classical_sig_on_pq_kex and sigmod.ECDSA_P256.id not in credentials:
            credentials[sigmod.ECDSA_P256.id] = provision_chain(sigmod.ECDSA_P256, sans)
        self.nrf_handler = make_nrf_handler(self.flags, fqdn) if nrf_stub else None
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((host, port))
        self._listener.listen(64)
        self.host, self.port = self._listener.getsockname()[:2]
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._accept_thread: threading.Thread | None = None

    # ----------------------------------------------------------- control

    def serve(self) -> "ReferenceEndpoint":
        self._accept_thread = threading.Thread(target=self._accept_loop,
                                               name="refserver-accept", daemon=True)
        self._accept_thread.start()
        return self

    def _accept_loop(self) -> None:
        self._listener.settimeout(0.2)
        while not self._stop.is_set():
            try:
                conn, _addr = self._listener.accept()
            except TimeoutError:
                continue
            except OSError:
                return
            conn.settimeout(15)
            thread = threading.Thread(target=self._handle, args=(conn,), daemon=True)
            thread.start()
            self._threads.append(thread)
            self._threads = [t for t in self._threads if t.is_alive()]

    def _handle(self, conn) -> None:
        try:
            handler = self.nrf_handler if self.nrf_handler else None
            server_handshake(conn, self.policy, app_handler=handler)
        finally:
            try:
                conn.close()
            except OSError:
                pass

    def shutdown(self, grace_s: float = 5.0) -> None:
        """Drained stop; idempotent."""
        if self._stop.is_set():
            return
        self._stop.set()
        try:
            self._listener.close()
        except OSError:
            pass
        if self._accept_thread is not None:
            self._accept_thread.join(timeout=grace_s)
        for thread in list(self._threads):
            thread.join(timeout=grace_s)

    @property
    def session_log(self):
        return self.policy.session_log

    def __enter__(self):
        return self.serve()

    def __exit__(self, *exc):
        self.shutdown()


@click.command("pqcheck-refserver")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=4433, show_default=True)
@click.option("--fqdn", default="", help="canonical FQDN placed in the certificate SAN")
@click.option("--san", "sans", multiple=True, help="additional SAN entries")
@click.option("--nrf-stub", is_flag=True, help="serve the NRF NFProfile stub over h2")
@click.option("--scheme", "schemes", multiple=True,
              help="credential schemes to provision (name or hex codepoint)")
@click.option("--no-require-client-cert", is_flag=True,
              help="do not enforce mutual TLS (distinct from --no-cert-request)")
@click.option("--no-cert-request", is_flag=True)
@click.option("--classical-fallback", is_flag=True)
@click.option("--classical-sig-on-pq-kex", is_flag=True)
@click.option("--leaf-only-chain", is_flag=True)
@click.option("--short-san", is_flag=True)
@click.option("--allow-tls12-offer-acceptance", is_flag=True)
@click.option("--accept-duplicate-ch", is_flag=True)
@click.option("--ambiguous-renegotiation", is_flag=True)
@click.option("--weak-cipher-acceptance", is_flag=True)
@click.option("--missing-nf-type-in-profile", is_flag=True)
def main(host, port, fqdn, sans, nrf_stub, schemes, no_require_client_cert, **flag_kwargs):
    """Run the reference endpoint until interrupted."""
    flags = MisbehaviorFlags(**flag_kwargs)
    scheme_ids = []
    for s in schemes:
        scheme_ids.append(int(s, 16) if s.lower().startswith("0x") else
                          sigmod.lookup(s).id)
    endpoint = ReferenceEndpoint(
        host=host, port=port, flags=flags, fqdn=fqdn,
        sans=list(sans) or None, nrf_stub=nrf_stub,
        schemes=scheme_ids or None,
        require_client_cert=not no_require_client_cert)
    endpoint.serve()
    click.echo(f"reference endpoint listening on {endpoint.host}:{endpoint.port} "
               f"(flags: {', '.join(n for n in flags.flag_names() if getattr(flags, n)) or 'strict'})")
    try:
        while True:
            endpoint._stop.wait(1)
            if endpoint._stop.is_set():
                break
    except KeyboardInterrupt:
        endpoint.shutdown()


if __name__ == "__main__":
    main()
