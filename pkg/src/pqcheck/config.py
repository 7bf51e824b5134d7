"""Run configuration: static target inventory, YAML loading, NF inference.

Schema violations and unknown keys are rejected with the YAML line that
caused them. Targets carry an optional declared NF type; otherwise the
type is inferred from hostname substrings, and ports in the 3GPP-reserved
29500-29600 SBI range imply a TLS-bearing endpoint.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import yaml

from .crypto import aead, kem, sig as sigmod

NF_NAMES = ["ausf", "nssf", "amf", "smf", "nrf", "udm", "udr", "pcf", "upf"]

DEFAULT_GROUPS = [0x11EC, 0x0768, 0x001D]
DEFAULT_SCHEMES = [0xFE63, 0xFE64, 0x0B01, 0x0B03, 0x0807, 0x0403]
DEFAULT_SUITES = [0x1302, 0x1301, 0x1303]


class ConfigError(ValueError):
    """Unreadable or invalid run configuration."""


def infer_nf_type(host: str) -> str:
    name = host.lower()
    best = ""
    for nf in NF_NAMES:
        if nf in name and len(nf) > len(best):
            best = nf
    return best.upper() if best else "unknown"


@dataclass
class TargetRecord:
    host: str
    port: int
    fqdn: str = ""
    nf_type: str = "unknown"
    tls_expected: bool = True
    declared_nf_type: str | None = None

    @property
    def address(self) -> str:
        return f"{self.host}:{self.port}"

    @classmethod
    def from_address(cls, address: str, fqdn: str = "",
                     nf_type: str | None = None) -> "TargetRecord":
        if ":" not in address:
            raise ConfigError(f"target {address!r} must be host:port")
        host, _, port_s = address.rpartition(":")
        try:
            port = int(port_s)
        except ValueError as exc:
            raise ConfigError(f"target {address!r} has a non-numeric port") from exc
        inferred = infer_nf_type(fqdn or host)
        tls_expected = port in range(29500, 29601) or port in (443, 4433, 8443)
        return cls(host=host, port=port, fqdn=fqdn,
                   nf_type=nf_type or inferred, tls_expected=tls_expected,
                   declared_nf_type=nf_type)


@dataclass
class FuzzSettings:
    enabled: bool = True
    seed: int = 0
    hello_budget_s: float = 10.0


@dataclass
class BenchSettings:
    clients: int = 4
    mode: str = "sequential"
    pool_workers: int = 0
    warmup: bool = True


@dataclass
class RunConfig:
    mode: str = "check"
    targets: list[TargetRecord] = field(default_factory=list)
    key_exchanges: list[int] = field(default_factory=lambda: list(DEFAULT_GROUPS))
    signature_schemes: list[int] = field(default_factory=lambda: list(DEFAULT_SCHEMES))
    cipher_suites: list[int] = field(default_factory=lambda: list(DEFAULT_SUITES))
    bench: BenchSettings = field(default_factory=BenchSettings)
    fuzz: FuzzSettings = field(default_factory=FuzzSettings)
    ca_bundle: str = ""
    client_cert: str = ""
    client_key: str = ""
    logs_dir: str = "logs"
    timeout_ms: int = 5000
    raw: dict = field(default_factory=dict)


def _resolve_codepoint(value, line: int, table_name: str) -> int:
    tables = {
        "group": (kem.KEM_BY_NAME, kem.KEM_ALGORITHMS),
        "scheme": (sigmod.SIG_BY_NAME, sigmod.SIG_ALGORITHMS),
        "suite": ({s.name: s for s in aead.SUITES.values()}, aead.SUITES),
    }
    by_name, by_id = tables[table_name]
    if isinstance(value, int):
        if value in by_id:
            return value
        raise ConfigError(f"line {line}: unknown {table_name} codepoint 0x{value:04x}")
    text = str(value)
    if text.lower().startswith("0x"):
        code = int(text, 16)
        if code in by_id:
            return code
        raise ConfigError(f"line {line}: unknown {table_name} codepoint {text}")
    if text in by_name:
        return by_name[text].id
    raise ConfigError(f"line {line}: unknown {table_name} name {text!r}")


_SCALAR_TYPES = {
    "mode": str, "ca_bundle": str, "client_cert": str, "client_key": str,
    "logs_dir": str, "timeout_ms": int,
}
_LIST_KEYS = {"targets", "key_exchanges", "signature_schemes", "cipher_suites"}
_SECTION_KEYS = {"bench", "fuzz"}
_BENCH_KEYS = {"clients": int, "mode": str, "pool_workers": int, "warmup": bool}
_FUZZ_KEYS = {"enabled": bool, "seed": int, "hello_budget_s": (int, float)}
_TARGET_KEYS = {"address": str, "fqdn": str, "nf_type": str, "tls_expected": bool}


def _scalar(node):
    return yaml.safe_load(yaml.serialize(node))


def load_config(path: str) -> RunConfig:
    """Parse + validate; unknown keys and type mismatches name their line."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path!r}: {exc}") from exc
    if root is None:
        return RunConfig()
    if not isinstance(root, yaml.MappingNode):
        raise ConfigError(f"line 1: config root must be a mapping")

    cfg = RunConfig(raw=yaml.safe_load(text))
    for key_node, value_node in root.value:
        key = key_node.value
        line = key_node.start_mark.line + 1
        if key in _SCALAR_TYPES:
            value = _scalar(value_node)
            if not isinstance(value, _SCALAR_TYPES[key]):
                raise ConfigError(
                    f"line {line}: {key} must be {_SCALAR_TYPES[key].__name__}")
            setattr(cfg, key, value)
        elif key == "targets":
            cfg.targets = _parse_targets(value_node)
        elif key == "key_exchanges":
            cfg.key_exchanges = [_resolve_codepoint(_scalar(n), n.start_mark.line + 1, "group")
                                 for n in value_node.value]
        elif key == "signature_schemes":
            cfg.signature_schemes = [_resolve_codepoint(_scalar(n), n.start_mark.line + 1, "scheme")
                                     for n in value_node.value]
        elif key == "cipher_suites":
            cfg.cipher_suites = [_resolve_codepoint(_scalar(n), n.start_mark.line + 1, "suite")
                                 for n in value_node.value]
        elif key == "bench":
            cfg.bench = _parse_section(value_node, _BENCH_KEYS, BenchSettings, "bench")
        elif key == "fuzz":
            cfg.fuzz = _parse_section(value_node, _FUZZ_KEYS, FuzzSettings, "fuzz")
        else:
            raise ConfigError(f"line {line}: unknown key {key!r}")
    if cfg.mode not in ("check", "validate", "bench", "fuzz", "full"):
        raise ConfigError(f"unknown mode {cfg.mode!r}")
    return cfg


def _parse_targets(node) -> list[TargetRecord]:
    if not isinstance(node, yaml.SequenceNode):
        raise ConfigError(f"line {node.start_mark.line + 1}: targets must be a list")
    out = []
    for item in node.value:
        line = item.start_mark.line + 1
        if isinstance(item, yaml.ScalarNode):
            out.append(TargetRecord.from_address(str(_scalar(item))))
            continue
        if not isinstance(item, yaml.MappingNode):
            raise ConfigError(f"line {line}: target must be an address or a mapping")
        fields_seen = {}
        for k_node, v_node in item.value:
            k = k_node.value
            if k not in _TARGET_KEYS:
                raise ConfigError(f"line {k_node.start_mark.line + 1}: "
                                  f"unknown target key {k!r}")
            value = _scalar(v_node)
            if not isinstance(value, _TARGET_KEYS[k]):
                raise ConfigError(f"line {k_node.start_mark.line + 1}: "
                                  f"target {k} must be {_TARGET_KEYS[k].__name__}")
            fields_seen[k] = value
        if "address" not in fields_seen:
            raise ConfigError(f"line {line}: target mapping needs an address")
        record = TargetRecord.from_address(fields_seen["address"],
                                           fqdn=fields_seen.get("fqdn", ""),
                                           nf_type=fields_seen.get("nf_type"))
        if "tls_expected" in fields_seen:
            record.tls_expected = fields_seen["tls_expected"]
        out.append(record)
    return out


def _parse_section(node, schema: dict, cls, section: str):
    if not isinstance(node, yaml.MappingNode):
        raise ConfigError(f"line {node.start_mark.line + 1}: {section} must be a mapping")
    kwargs = {}
    for k_node, v_node in node.value:
        k = k_node.value
        line = k_node.start_mark.line + 1
        if k not in schema:
            raise ConfigError(f"line {line}: unknown {section} key {k!r}")
        value = _scalar(v_node)
        expected = schema[k]
        if not isinstance(value, expected if isinstance(expected, tuple) else (expected,)):
            raise ConfigError(f"line {line}: {section}.{k} has the wrong type")
        kwargs[k] = value
    return cls(**kwargs)
