import threading
from collections import deque
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from censorscout import _pykernels, kernels
from censorscout.ingest import host_of
from censorscout.search import DEFAULT_EXCLUSIONS
from censorscout.simulation import LinkedWorld, World, generate_linked_world, simulated_services

try:
    from censorscout import _ckernels
except ImportError:  # extension not built
    _ckernels = None

KERNEL_IMPLS = [pytest.param(_pykernels, id="python")]
if _ckernels is not None:
    KERNEL_IMPLS.append(pytest.param(_ckernels, id="cython"))


@pytest.fixture(params=KERNEL_IMPLS)
def kernel_impl(request, monkeypatch):
    """Run a test once per available kernel backend."""
    impl = request.param
    for name in ("scan", "fmm", "count_ngrams"):
        monkeypatch.setattr(kernels, name, getattr(impl, name))
    return impl


class LocalServer:
    """Tiny HTTP server; ``routes`` maps path -> (status, headers, body)."""

    def __init__(self):
        self.routes = {}
        self.requests = []
        server = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def do_GET(self):
                server.requests.append((self.path, dict(self.headers)))
                path = self.path.split("?", 1)[0]
                route = server.routes.get(self.path) or server.routes.get(path)
                if route is None:
                    status, headers, body = 404, {"Content-Type": "text/plain"}, b"not found"
                elif callable(route):
                    status, headers, body = route(self)
                else:
                    status, headers, body = route
                self.send_response(status)
                for k, v in headers.items():
                    self.send_header(k, v)
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                try:
                    self.wfile.write(body)
                except (BrokenPipeError, ConnectionResetError):
                    pass

            def log_message(self, *args):
                pass

        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.httpd.daemon_threads = True
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)

    @property
    def base(self):
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}"

    def url(self, path):
        return self.base + path


@pytest.fixture
def http_server():
    srv = LocalServer()
    srv.thread.start()
    yield srv
    srv.httpd.shutdown()
    srv.httpd.server_close()


# --- offline worlds ------------------------------------------------------------

@pytest.fixture(scope="session")
def linked_world(tmp_path_factory):
    """The generated phrase-linked world and its on-disk copy."""
    spec = generate_linked_world()
    root = spec.write(tmp_path_factory.mktemp("linked"))
    return spec, World.load(root)


def wide_world(root, n_results=150, censored_every=3, extra_results=()):
    """One censored seed page whose phrases return many hosts, 50 results per phrase.

    Censored result hosts get a page carrying the same phrases, so they
    enter the frontier without opening new queries.
    """
    urls = [f"http://host{i}.example/p" for i in range(n_results)] + list(extra_results)
    censored = {"seed.example"} | {f"host{i}.example" for i in range(0, n_results, censored_every)}
    phrases = [chr(0x5E7F) + chr(0x5E00 + i) for i in range(0, len(urls), 50)]
    index = {p: urls[i * 50:(i + 1) * 50] for i, p in enumerate(phrases)}
    pages = {"http://seed.example/": phrases}
    pages.update({u: phrases for u in urls if host_of(u) in censored})
    spec = LinkedWorld(
        seeds=["http://seed.example/"],
        censored_hosts=censored,
        page_phrases=pages,
        search_index=index,
        phrase_df={p: 3 for p in phrases},
        config={"ngram_mode": "unigram"},
    )
    return World.load(spec.write(root))


def run_world(world, overrides=None, **run_kwargs):
    from censorscout.pipeline import run

    config = world.config(overrides)
    with simulated_services(world, config) as (services, _censor):
        return run(config, services, **run_kwargs), config


def excluded(host):
    return any(host == s or host.endswith("." + s) for s in DEFAULT_EXCLUSIONS)


def reachable_oracle(spec: LinkedWorld) -> set[str]:
    """Breadth-first closure over the world manifest, independent of the pipeline."""
    censored = spec.censored_hosts
    seeds = {host_of(u) for u in spec.seeds}
    queue = deque(u for u in spec.seeds if host_of(u) in censored)
    expanded, found = set(queue), set()
    while queue:
        page = queue.popleft()
        for phrase in spec.page_phrases.get(page, []):
            for url in spec.search_index.get(phrase, []):
                host = host_of(url)
                if excluded(host) or host not in censored:
                    continue
                if host not in seeds:
                    found.add(host)
                if url in spec.page_phrases and url not in expanded:
                    expanded.add(url)
                    queue.append(url)
    return found


# --- acceptance summary lines ----------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
