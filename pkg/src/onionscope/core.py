"""Domain types shared across the pipeline, plus Tor v3 onion address validation.

A v3 onion hostname is a 56-character base32 label that decodes to exactly
35 bytes: a 32-byte ed25519 public key, a 2-byte truncated SHA3-256 checksum,
and a version byte (0x03).  Everything here is an immutable value with pure
operations, safe to use from any number of workers.
"""

from __future__ import annotations

import base64
import enum
import hashlib
import re
from dataclasses import dataclass
from datetime import date, datetime, timezone

BASE32_ALPHABET = "abcdefghijklmnopqrstuvwxyz234567"
ONION_LABEL_LENGTH = 56
ONION_VERSION = 3
CHECKSUM_PREFIX = b".onion checksum"

_LABEL_RE = re.compile(r"^[a-z2-7]{56}$")
_CANDIDATE_RE = re.compile(r"([a-z2-7]{56})\.onion", re.IGNORECASE)


class OnionAddressError(ValueError):
    """Base class for v3 address validation failures."""


class WrongLengthError(OnionAddressError):
    pass


class BadAlphabetError(OnionAddressError):
    pass


class BadVersionError(OnionAddressError):
    pass


class BadChecksumError(OnionAddressError):
    pass


class SourceKind(enum.Enum):
    """The four families of address sources monitored by the collector."""

    THREAT_INTEL = "threat_intel"
    CODE_REPO = "code_repo"
    WEB_GATEWAY = "web_gateway"
    TOR_REPOSITORY = "tor_repository"


@dataclass(frozen=True)
class OnionAddress:
    """A validated v3 onion address.

    Construct through :func:`parse_onion_address`; the constructor itself does
    not re-verify the checksum.
    """

    label: str
    pubkey: bytes
    checksum: bytes
    version: int = ONION_VERSION

    @property
    def hostname(self) -> str:
        return self.label + ".onion"

    def __str__(self) -> str:
        return self.hostname


@dataclass(frozen=True)
class Discovery:
    """Provenance record: one address seen in one source."""

    address: OnionAddress
    source: SourceKind
    advertiser: str
    discovered_at: datetime

    def __post_init__(self) -> None:
        if not self.advertiser:
            raise ValueError("advertiser must be non-empty")
        now = datetime.now(timezone.utc)
        if self.discovered_at > now:
            raise ValueError("discovered_at is in the future")


@dataclass(frozen=True, order=True)
class DayKey:
    """Calendar date used to partition stored objects, rendered yyyy/mm/dd."""

    day: date

    def __str__(self) -> str:
        return f"{self.day.year:04d}/{self.day.month:02d}/{self.day.day:02d}"

    @classmethod
    def from_string(cls, text: str) -> "DayKey":
        """Accepts yyyy/mm/dd or yyyy-mm-dd; raises ValueError on bad dates."""
        parts = text.replace("-", "/").split("/")
        if len(parts) != 3:
            raise ValueError(f"not a date: {text!r}")
        y, m, d = (int(p) for p in parts)
        return cls(date(y, m, d))

    @classmethod
    def from_datetime(cls, dt: datetime) -> "DayKey":
        return cls(dt.astimezone(timezone.utc).date())

    def next(self) -> "DayKey":
        from datetime import timedelta

        return DayKey(self.day + timedelta(days=1))


def compute_v3_checksum(pubkey: bytes, version: int = ONION_VERSION) -> bytes:
    """First two bytes of SHA3-256(".onion checksum" || pubkey || version)."""
    if len(pubkey) != 32:
        raise ValueError(f"pubkey must be 32 bytes, got {len(pubkey)}")
    digest = hashlib.sha3_256(CHECKSUM_PREFIX + pubkey + bytes([version])).digest()
    return digest[:2]


def encode_onion_address(pubkey: bytes, version: int = ONION_VERSION) -> OnionAddress:
    """Build the address for a public key (used by generators and tests)."""
    checksum = compute_v3_checksum(pubkey, version)
    raw = pubkey + checksum + bytes([version])
    label = base64.b32encode(raw).decode("ascii").lower()
    return OnionAddress(label=label, pubkey=pubkey, checksum=checksum, version=version)


def parse_onion_address(text: str) -> OnionAddress:
    """Validate a candidate hostname and return the normalized address.

    Accepts any letter case, an optional trailing ".onion", and
    subdomain-qualified forms such as www.<label>.onion (only the rightmost
    56-character label is kept).  Validation decodes the label and verifies
    the embedded version byte and checksum.
    """
    label = text.strip().lower().rstrip(".")
    if label.endswith(".onion"):
        label = label[: -len(".onion")]
    if "." in label:
        label = label.rsplit(".", 1)[1]
    if len(label) != ONION_LABEL_LENGTH:
        raise WrongLengthError(f"label has {len(label)} chars, expected 56")
    if not _LABEL_RE.match(label):
        raise BadAlphabetError("label contains characters outside a-z2-7")
    raw = base64.b32decode(label.upper())
    pubkey, checksum, version = raw[:32], raw[32:34], raw[34]
    # Checksum is verified against the decoded version byte before the version
    # check, so any single corrupted character surfaces as BadChecksum.
    expected = compute_v3_checksum(pubkey, version)
    if checksum != expected:
        raise BadChecksumError("checksum mismatch")
    if version != ONION_VERSION:
        raise BadVersionError(f"version byte is {version}, expected 3")
    return OnionAddress(label=label, pubkey=pubkey, checksum=checksum, version=version)


@dataclass
class ExtractionStats:
    """Side-channel counters for :func:`extract_onion_addresses`."""

    candidates: int = 0
    invalid: int = 0
    duplicates: int = 0


def extract_onion_addresses(
    text: str, stats: ExtractionStats | None = None
) -> list[OnionAddress]:
    """Scan arbitrary text for valid v3 addresses.

    Invalid candidates (bad checksum or version) are skipped silently;
    duplicates are dropped, keeping first-occurrence order.
    """
    seen: set[str] = set()
    out: list[OnionAddress] = []
    for match in _CANDIDATE_RE.finditer(text.lower()):
        if stats is not None:
            stats.candidates += 1
        try:
            address = parse_onion_address(match.group(1))
        except OnionAddressError:
            if stats is not None:
                stats.invalid += 1
            continue
        if address.label in seen:
            if stats is not None:
                stats.duplicates += 1
            continue
        seen.add(address.label)
        out.append(address)
    return out


def utcnow() -> datetime:
    return datetime.now(timezone.utc)
