"""DER codecs for private keys and X.509 with ML-DSA support."""

from . import der, privkey, x509  # noqa: F401
from .privkey import (  # noqa: F401
    BindingClass,
    PrivateKeyDocument,
    PrivateKeyError,
    binding_class,
    decode_private_key,
    encode_private_key,
    expand_from_seed,
    new_document,
)
from .x509 import CertificateError, CertificateView, build_certificate, parse_certificate  # noqa: F401
