"""Connectors that pull the four source families and enqueue fresh addresses.

Every connector takes an injected page-fetch function (URL -> body string,
failures raised), so the same code runs against live HTTP or an offline
fixture directory.  The scheduler decides which sources are due and never
lets one source run twice concurrently.
"""

from __future__ import annotations

import hashlib
import re
import time
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from html.parser import HTMLParser
from pathlib import Path
from typing import Callable
from urllib.parse import urljoin, urlsplit

from .core import (
    Discovery,
    SourceKind,
    extract_onion_addresses,
    parse_onion_address,
    OnionAddressError,
)
from .fetch import FetchQueue, FetchTask
from .store import Catalogs

FetchPageFn = Callable[[str], str]

DEFAULT_CRAWL_DEPTH = 3
DEFAULT_REQUEST_DELAY = 0.2


class EmptyGatewayListError(ValueError):
    pass


@dataclass
class SourceConfig:
    kind: SourceKind
    name: str
    endpoints: list[str]
    interval: timedelta
    crawl_depth: int = DEFAULT_CRAWL_DEPTH
    request_delay: float = DEFAULT_REQUEST_DELAY
    enabled: bool = True

    def __post_init__(self) -> None:
        if self.interval <= timedelta(0):
            raise ValueError("interval must be positive")
        if self.crawl_depth < 0:
            raise ValueError("crawl_depth must be >= 0")
        if self.request_delay < 0:
            raise ValueError("request_delay must be >= 0")


@dataclass
class ConnectorRun:
    source: SourceKind
    started_at: datetime
    finished_at: datetime | None = None
    discoveries: list[Discovery] = field(default_factory=list)
    pages_visited: int = 0
    errors: list[tuple[str, str]] = field(default_factory=list)


def gateway_unproxy(hostname: str, gateway_domains: list[str]) -> str | None:
    """Rewrite <label>.<gateway-domain> to <label>.onion when the label is valid."""
    hostname = hostname.strip().lower().rstrip(".")
    for domain in gateway_domains:
        suffix = "." + domain.lower()
        if not hostname.endswith(suffix):
            continue
        label = hostname[: -len(suffix)].rsplit(".", 1)[-1]
        try:
            address = parse_onion_address(label)
        except OnionAddressError:
            return None
        return address.hostname
    return None


def _unproxy_body(body: str, gateway_domains: list[str]) -> str:
    """Rewrite gateway-proxied hostnames inside a page to their .onion form."""
    if not gateway_domains:
        return body
    pattern = re.compile(
        r"([a-z2-7]{56})\.(" + "|".join(re.escape(d.lower()) for d in gateway_domains) + r")\b",
        re.IGNORECASE,
    )
    return pattern.sub(lambda m: m.group(1) + ".onion", body)


def build_dork_queries(gateway_domains: list[str]) -> list[str]:
    """One site: query per configured web-Tor gateway, order preserved."""
    if not gateway_domains:
        raise EmptyGatewayListError("no gateway domains configured")
    return [f"site:{domain}" for domain in gateway_domains]


def parse_source_document(
    kind: SourceKind,
    advertiser: str,
    body: str,
    gateway_domains: list[str] | None = None,
    now: datetime | None = None,
) -> list[Discovery]:
    """Extract validated addresses from one fetched source page."""
    stamp = now or datetime.now(timezone.utc)
    if kind is SourceKind.WEB_GATEWAY:
        body = _unproxy_body(body, gateway_domains or [])
    return [
        Discovery(address=a, source=kind, advertiser=advertiser, discovered_at=stamp)
        for a in extract_onion_addresses(body)
    ]


class _LinkParser(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.hrefs: list[str] = []

    def handle_starttag(self, tag, attrs):
        if tag == "a":
            for name, value in attrs:
                if name == "href" and value:
                    self.hrefs.append(value)


def extract_links(base_url: str, body: str) -> list[str]:
    """Same-site links found in a page, absolutized, order preserved."""
    parser = _LinkParser()
    try:
        parser.feed(body)
    except Exception:
        return []
    base = urlsplit(base_url)
    links = []
    seen = set()
    for href in parser.hrefs:
        absolute = urljoin(base_url, href.strip())
        parts = urlsplit(absolute)
        if parts.scheme not in ("http", "https"):
            continue
        if parts.netloc != base.netloc:
            continue
        cleaned = parts._replace(fragment="").geturl()
        if cleaned not in seen:
            seen.add(cleaned)
            links.append(cleaned)
    return links


def crawl_repository(
    seed: str,
    fetch: FetchPageFn,
    depth: int = DEFAULT_CRAWL_DEPTH,
    delay: float = DEFAULT_REQUEST_DELAY,
    now: datetime | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> ConnectorRun:
    """Breadth-first crawl of one Tor-repository site, depth hops from the seed."""
    from collections import deque

    run = ConnectorRun(source=SourceKind.TOR_REPOSITORY, started_at=now or datetime.now(timezone.utc))
    queue: deque[tuple[str, int]] = deque([(seed, 0)])
    visited: set[str] = set()
    first = True
    while queue:
        url, hops = queue.popleft()
        if url in visited:
            continue
        visited.add(url)
        if not first and delay > 0:
            sleep(delay)
        first = False
        try:
            body = fetch(url)
        except Exception as exc:
            run.errors.append((url, str(exc)))
            continue
        run.pages_visited += 1
        run.discoveries.extend(
            parse_source_document(SourceKind.TOR_REPOSITORY, url, body, now=run.started_at)
        )
        if hops < depth:
            for link in extract_links(url, body):
                if link not in visited:
                    queue.append((link, hops + 1))
    run.finished_at = datetime.now(timezone.utc)
    return run


def run_connector(
    config: SourceConfig,
    fetch: FetchPageFn,
    gateway_domains: list[str] | None = None,
    now: datetime | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> ConnectorRun:
    """Run one source end to end and return its run record.

    Threat-intel, code-repo and gateway sources fetch each endpoint as a
    single page; endpoints containing "{query}" are expanded once per gateway
    dork query.  Tor repositories are crawled breadth-first per endpoint.
    """
    started = now or datetime.now(timezone.utc)
    if config.kind is SourceKind.TOR_REPOSITORY:
        run = ConnectorRun(source=config.kind, started_at=started)
        for endpoint in config.endpoints:
            sub = crawl_repository(
                endpoint, fetch, depth=config.crawl_depth,
                delay=config.request_delay, now=started, sleep=sleep,
            )
            run.discoveries.extend(sub.discoveries)
            run.pages_visited += sub.pages_visited
            run.errors.extend(sub.errors)
        run.finished_at = datetime.now(timezone.utc)
        return run

    run = ConnectorRun(source=config.kind, started_at=started)
    urls: list[str] = []
    for endpoint in config.endpoints:
        if "{query}" in endpoint and config.kind is SourceKind.WEB_GATEWAY:
            for query in build_dork_queries(gateway_domains or []):
                urls.append(endpoint.replace("{query}", query.replace(" ", "+")))
        else:
            urls.append(endpoint)
    for url in urls:
        try:
            body = fetch(url)
        except Exception as exc:
            run.errors.append((url, str(exc)))
            continue
        run.pages_visited += 1
        run.discoveries.extend(
            parse_source_document(
                config.kind, url, body, gateway_domains=gateway_domains, now=started
            )
        )
    run.finished_at = datetime.now(timezone.utc)
    return run


def enqueue_new(
    discoveries: list[Discovery], catalogs: Catalogs, queue: FetchQueue
) -> int:
    """Record provenance for every discovery; enqueue only never-seen addresses."""
    enqueued = 0
    for discovery in discoveries:
        if catalogs.record_discovery(discovery):
            queue.put(FetchTask(discovery.address, discovery.discovered_at))
            enqueued += 1
    return enqueued


def scheduler_tick(
    now: datetime,
    configs: list[SourceConfig],
    last_runs: dict[SourceKind, datetime],
    running: frozenset[SourceKind] = frozenset(),
) -> list[SourceConfig]:
    """Sources due to run: enabled, not already running, interval elapsed."""
    due = []
    for config in configs:
        if not config.enabled or config.kind in running:
            continue
        last = last_runs.get(config.kind)
        if last is None or now - last >= config.interval:
            due.append(config)
    return due


class ConnectorScheduler:
    """Tracks per-source last runs and guarantees one run at a time per source."""

    def __init__(self, configs: list[SourceConfig]):
        self.configs = configs
        self.last_runs: dict[SourceKind, datetime] = {}
        self.running: set[SourceKind] = set()

    def due(self, now: datetime | None = None) -> list[SourceConfig]:
        now = now or datetime.now(timezone.utc)
        picked = scheduler_tick(now, self.configs, self.last_runs, frozenset(self.running))
        for config in picked:
            self.running.add(config.kind)
        return picked

    def complete(self, kind: SourceKind, finished_at: datetime | None = None) -> None:
        self.running.discard(kind)
        self.last_runs[kind] = finished_at or datetime.now(timezone.utc)


def fixture_path(root: str | Path, source_name: str, url: str) -> Path:
    """Where the offline fixture for a URL lives: fixtures/<source>/<url-hash>.html."""
    digest = hashlib.sha256(url.encode("utf-8")).hexdigest()[:16]
    return Path(root) / source_name / f"{digest}.html"


class FixtureFetcher:
    """Page-fetch binding that reads from a fixture directory."""

    def __init__(self, root: str | Path, source_name: str):
        self.root = Path(root)
        self.source_name = source_name

    def __call__(self, url: str) -> str:
        path = fixture_path(self.root, self.source_name, url)
        if not path.is_file():
            raise FileNotFoundError(f"no fixture for {url} ({path.name})")
        return path.read_text(encoding="utf-8")


def http_fetcher(timeout: float = 30.0, user_agent: str = "onionscope/0.1") -> FetchPageFn:
    """Live surface-web binding used by the CLI's discover command."""
    import requests

    session = requests.Session()
    session.headers["User-Agent"] = user_agent

    def fetch(url: str) -> str:
        response = session.get(url, timeout=timeout)
        response.raise_for_status()
        return response.text

    return fetch
