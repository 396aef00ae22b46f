"""Filesystem-backed object store and the two ingestion catalogs.

Layout on disk mirrors the key scheme ``<bucket>/<yyyy/mm/dd>/<name>``.
Object writes go through a temp file and an atomic rename, so readers never
observe torn objects.  The catalogs are append-only JSON-lines logs replayed
into an in-memory index on open; per-row mutations are atomic under a lock.
"""

from __future__ import annotations

import json
import os
import tempfile
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterator

from .core import DayKey, Discovery, SourceKind

BUCKETS = ("onions", "datasets", "models")


class StorageError(RuntimeError):
    pass


class FileObjectStore:
    """Date-partitioned object store over a local directory tree."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        for bucket in BUCKETS:
            (self.root / bucket).mkdir(parents=True, exist_ok=True)

    def _check_bucket(self, bucket: str) -> None:
        if bucket not in BUCKETS:
            raise StorageError(f"unknown bucket: {bucket}")

    def key(self, bucket: str, day: DayKey, name: str) -> str:
        return f"{bucket}/{day}/{name}"

    def put_object(self, bucket: str, day: DayKey, name: str, data: bytes) -> str:
        """Write atomically; overwriting an existing key replaces it whole."""
        self._check_bucket(bucket)
        key = self.key(bucket, day, name)
        path = self.root / key
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except OSError as exc:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise StorageError(str(exc)) from exc
        return key

    def get_object(self, key: str) -> bytes:
        path = self.root / key
        try:
            return path.read_bytes()
        except OSError as exc:
            raise StorageError(f"no such object: {key}") from exc

    def object_exists(self, key: str) -> bool:
        return (self.root / key).is_file()

    def list_by_date(self, bucket: str, day: DayKey) -> list[str]:
        """All keys under the day prefix, lexicographically sorted."""
        self._check_bucket(bucket)
        base = self.root / bucket / str(day)
        if not base.is_dir():
            return []
        keys = []
        for path in base.rglob("*"):
            if path.is_file():
                keys.append(str(path.relative_to(self.root)))
        return sorted(keys)

    def delete_by_date(self, bucket: str, day: DayKey) -> int:
        """Remove a day's objects (used when replaying a batch from scratch)."""
        count = 0
        for key in self.list_by_date(bucket, day):
            (self.root / key).unlink()
            count += 1
        return count

    def list_days(self, bucket: str) -> list[DayKey]:
        self._check_bucket(bucket)
        base = self.root / bucket
        days = []
        for ydir in sorted(base.iterdir()) if base.is_dir() else []:
            if not ydir.is_dir() or not ydir.name.isdigit():
                continue
            for mdir in sorted(ydir.iterdir()):
                for ddir in sorted(mdir.iterdir()):
                    days.append(DayKey.from_string(f"{ydir.name}/{mdir.name}/{ddir.name}"))
        return days

    def count_objects(self, bucket: str) -> int:
        base = self.root / bucket
        return sum(1 for p in base.rglob("*") if p.is_file())


def _ts_to_str(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _ts_from_str(text: str) -> datetime:
    return datetime.strptime(text, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)


@dataclass
class DiscoveryCatalogRow:
    address: str
    advertiser: str
    identification_timestamp: datetime
    source: SourceKind


@dataclass
class DownloadCatalogRow:
    address: str
    downloaded: bool = False
    downloaded_timestamp: datetime | None = None
    found_in: dict = field(default_factory=dict)  # SourceKind.value -> bool
    first_seen_timestamp: datetime | None = None
    last_status: str | None = None
    last_status_timestamp: datetime | None = None


class _AppendLog:
    """Append-only JSONL file; events are replayed on open."""

    def __init__(self, path: Path):
        self.path = path
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "a", encoding="utf-8")

    def replay(self) -> Iterator[dict]:
        if not self.path.exists():
            return
        with open(self.path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    yield json.loads(line)

    def append(self, event: dict) -> None:
        self._fh.write(json.dumps(event, sort_keys=True) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


class DiscoveryCatalog:
    """One row per (address, source): who advertised it and when."""

    def __init__(self, path: str | Path):
        self._lock = threading.RLock()
        self._rows: dict[tuple[str, str], DiscoveryCatalogRow] = {}
        self._log = _AppendLog(Path(path))
        for event in self._log.replay():
            self._apply(event)

    def _apply(self, event: dict) -> None:
        key = (event["address"], event["source"])
        if key not in self._rows:
            self._rows[key] = DiscoveryCatalogRow(
                address=event["address"],
                advertiser=event["advertiser"],
                identification_timestamp=_ts_from_str(event["ts"]),
                source=SourceKind(event["source"]),
            )

    def record(self, discovery: Discovery) -> bool:
        """Insert if unseen for this (address, source); returns True on insert."""
        with self._lock:
            key = (discovery.address.label, discovery.source.value)
            if key in self._rows:
                return False
            event = {
                "address": discovery.address.label,
                "source": discovery.source.value,
                "advertiser": discovery.advertiser,
                "ts": _ts_to_str(discovery.discovered_at),
            }
            self._log.append(event)
            self._apply(event)
            return True

    def rows(self) -> list[DiscoveryCatalogRow]:
        with self._lock:
            return list(self._rows.values())

    def identified_on(self, day: DayKey) -> dict[SourceKind, int]:
        counts = {kind: 0 for kind in SourceKind}
        with self._lock:
            for row in self._rows.values():
                if DayKey.from_datetime(row.identification_timestamp) == day:
                    counts[row.source] += 1
        return counts

    def close(self) -> None:
        self._log.close()


class DownloadCatalog:
    """One row per address: source booleans plus download state."""

    def __init__(self, path: str | Path):
        self._lock = threading.RLock()
        self._rows: dict[str, DownloadCatalogRow] = {}
        self._log = _AppendLog(Path(path))
        for event in self._log.replay():
            self._apply(event)

    def _apply(self, event: dict) -> None:
        row = self._rows.get(event["address"])
        if row is None:
            row = DownloadCatalogRow(address=event["address"])
            self._rows[event["address"]] = row
        op = event["op"]
        if op == "seen":
            row.found_in[event["source"]] = True
            if row.first_seen_timestamp is None:
                row.first_seen_timestamp = _ts_from_str(event["ts"])
        elif op == "downloaded":
            row.downloaded = True
            row.downloaded_timestamp = _ts_from_str(event["ts"])
            row.last_status = "ok"
            row.last_status_timestamp = row.downloaded_timestamp
        elif op == "status":
            row.last_status = event["status"]
            row.last_status_timestamp = _ts_from_str(event["ts"])

    def record_source(
        self, address: str, source: SourceKind, ts: datetime | None = None
    ) -> bool:
        """Set the source boolean; returns True iff the row was newly created.

        This is the atomic seen-check used to decide whether an address gets a
        fetch task.
        """
        with self._lock:
            created = address not in self._rows
            row = self._rows.get(address)
            if row is not None and row.found_in.get(source.value):
                return False
            event = {
                "op": "seen",
                "address": address,
                "source": source.value,
                "ts": _ts_to_str(ts or datetime.now(timezone.utc)),
            }
            self._log.append(event)
            self._apply(event)
            return created

    def mark_downloaded(self, address: str, ts: datetime | None = None) -> bool:
        """Compare-and-set downloaded false -> true; True iff this call did it."""
        with self._lock:
            row = self._rows.get(address)
            if row is None:
                raise KeyError(f"address not in catalog: {address}")
            if row.downloaded:
                return False
            event = {
                "op": "downloaded",
                "address": address,
                "ts": _ts_to_str(ts or datetime.now(timezone.utc)),
            }
            self._log.append(event)
            self._apply(event)
            return True

    def record_status(
        self, address: str, status: str, ts: datetime | None = None
    ) -> None:
        with self._lock:
            if address not in self._rows:
                raise KeyError(f"address not in catalog: {address}")
            event = {
                "op": "status",
                "address": address,
                "status": status,
                "ts": _ts_to_str(ts or datetime.now(timezone.utc)),
            }
            self._log.append(event)
            self._apply(event)

    def get(self, address: str) -> DownloadCatalogRow | None:
        with self._lock:
            return self._rows.get(address)

    def is_downloaded(self, address: str) -> bool:
        with self._lock:
            row = self._rows.get(address)
            return bool(row and row.downloaded)

    def rows(self) -> list[DownloadCatalogRow]:
        with self._lock:
            return list(self._rows.values())

    def downloaded_count(self) -> int:
        with self._lock:
            return sum(1 for r in self._rows.values() if r.downloaded)

    def pending_addresses(self) -> list[str]:
        """Addresses seen but not downloaded (queue rebuild after restart)."""
        with self._lock:
            return [a for a, r in sorted(self._rows.items()) if not r.downloaded]

    def downloads_on(self, day: DayKey) -> dict[str, int]:
        ok = failed = 0
        with self._lock:
            for row in self._rows.values():
                if row.downloaded and row.downloaded_timestamp is not None:
                    if DayKey.from_datetime(row.downloaded_timestamp) == day:
                        ok += 1
                elif (
                    row.last_status not in (None, "ok")
                    and row.last_status_timestamp is not None
                    and DayKey.from_datetime(row.last_status_timestamp) == day
                ):
                    failed += 1
        return {"downloaded_ok": ok, "failed": failed}

    def new_on(self, day: DayKey) -> int:
        with self._lock:
            return sum(
                1
                for row in self._rows.values()
                if row.first_seen_timestamp is not None
                and DayKey.from_datetime(row.first_seen_timestamp) == day
            )

    def close(self) -> None:
        self._log.close()


class Catalogs:
    """The discovery and download catalogs opened together under one root."""

    def __init__(self, root: str | Path):
        root = Path(root)
        self.discoveries = DiscoveryCatalog(root / "discovery_catalog.jsonl")
        self.downloads = DownloadCatalog(root / "download_catalog.jsonl")

    def record_discovery(self, discovery: Discovery) -> bool:
        """Record provenance in both catalogs; True iff the address is new."""
        self.discoveries.record(discovery)
        return self.downloads.record_source(discovery.address.label, discovery.source)

    def close(self) -> None:
        self.discoveries.close()
        self.downloads.close()
