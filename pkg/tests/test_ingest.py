import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from censorscout.ingest import (
    FetchPolicy,
    Fetcher,
    HostRateLimiter,
    NonHtmlContent,
    PageDocument,
    RobotsDisallowed,
    Timeout,
    TooManyRedirects,
    TransportFailure,
    extract_text,
    fetch_page,
    host_of,
)

HTML = {"Content-Type": "text/html; charset=utf-8"}


def fast_policy(**kw):
    kw.setdefault("per_host_delay", 0.0)
    kw.setdefault("respect_robots", False)
    kw.setdefault("timeout", 5.0)
    return FetchPolicy(**kw)


# --- extract_text ----------------------------------------------------------------------

def test_block_tags_separate_words():
    assert extract_text(b"<p>a</p><p>b</p>") == "a b"


def test_comment_removed_without_gap():
    assert extract_text("<div>中国<!--hidden-->共产党</div>".encode()) == "中国共产党"


def test_unclosed_tags_tolerated():
    assert extract_text(b"<b><i>text") == "text"


def test_script_and_style_dropped():
    html = "<html><head><style>p{x:1}</style></head><body><p>你好</p><script>x()</script></body></html>"
    text = extract_text(html.encode())
    assert "你好" in text and "x()" not in text and "{" not in text


def test_punctuation_preserved():
    assert extract_text("<p>自由。民主！</p><p>ok?</p>".encode()) == "自由。民主！ ok?"


def test_meta_charset_used():
    body = '<html><head><meta charset="gb2312"></head><body>特首</body></html>'.encode("gb2312")
    assert extract_text(body) == "特首"


def test_declared_charset_beats_meta():
    body = '<meta charset="utf-8"><p>特首</p>'.encode("gbk")
    assert extract_text(body, "gbk") == "特首"


def test_invalid_utf8_is_replaced():
    assert extract_text(b"<p>ok \xff\xfe</p>") == "ok ��"


def test_unknown_charset_falls_back_to_utf8():
    assert extract_text("<p>中文</p>".encode(), "x-no-such-codec") == "中文"


def test_entities_decoded_and_neutralised():
    text = extract_text(b"<p>AT&amp;T &lt;b&gt;</p>")
    assert text == "AT＆T ＜b>"
    assert extract_text(text.encode()) == text


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=300))
def test_extract_text_total_and_deterministic(data):
    assert extract_text(data) == extract_text(data)


html_fragments = st.lists(
    st.sampled_from(["<p>", "</p>", "<b>", "<script>", "</script>", "<!--", "-->", "&amp;", "&lt;", "<", ">", "&",
                     "中国", "text", " ", "\n", "。", "<br/>", "<style>", "</style>", "&#20013;", "<![CDATA[x]]>"]),
    max_size=30,
).map("".join)


@settings(max_examples=300, deadline=None)
@given(st.one_of(html_fragments, st.text(max_size=100)))
def test_extract_text_is_fixpoint_on_its_output(html):
    once = extract_text(html.encode("utf-8", "surrogatepass").decode("utf-8", "replace").encode())
    assert extract_text(once.encode()) == once
    assert "<" not in once


# --- fetching ------------------------------------------------------------------------------

def test_fetch_strips_markup(http_server):
    http_server.routes["/p"] = (200, HTML, "<html><body><p>你好</p><script>x()</script></body></html>".encode())
    doc = fetch_page(http_server.url("/p"), fast_policy())
    assert "你好" in doc.body_text and "x()" not in doc.body_text
    assert doc.host == "127.0.0.1"


def test_fetch_is_idempotent(http_server):
    http_server.routes["/p"] = (200, HTML, b"<p>static page</p>")
    f = Fetcher(fast_policy())
    assert f.fetch(http_server.url("/p")).body_text == f.fetch(http_server.url("/p")).body_text


def test_body_cap(http_server):
    http_server.routes["/big"] = (200, {"Content-Type": "text/html"}, b"a" * (10 * 1024 * 1024))
    doc = fetch_page(http_server.url("/big"), fast_policy(max_body_bytes=1024 * 1024))
    assert doc.content_bytes_read == 1048576


def test_gb2312_from_header(http_server):
    assert "特首".encode("gb2312") == bytes.fromhex("ccd8cad7")
    http_server.routes["/gb"] = (200, {"Content-Type": "text/html; charset=GB2312"}, b"<p>" + bytes.fromhex("ccd8cad7") + b"</p>")
    assert "特首" in fetch_page(http_server.url("/gb"), fast_policy()).body_text


def test_gb2312_from_meta(http_server):
    body = b'<html><head><meta http-equiv="Content-Type" content="text/html; charset=gb2312"></head><body>' + bytes.fromhex("ccd8cad7") + b"</body></html>"
    http_server.routes["/gb"] = (200, {"Content-Type": "text/html"}, body)
    assert "特首" in fetch_page(http_server.url("/gb"), fast_policy()).body_text


def test_redirects_followed_and_capped(http_server):
    http_server.routes["/a"] = (302, {"Location": "/b"}, b"")
    http_server.routes["/b"] = (301, {"Location": "/c"}, b"")
    http_server.routes["/c"] = (200, HTML, b"<p>done</p>")
    assert fetch_page(http_server.url("/a"), fast_policy(max_redirects=2)).body_text == "done"
    with pytest.raises(TooManyRedirects):
        fetch_page(http_server.url("/a"), fast_policy(max_redirects=1))


def test_non_html_skipped(http_server):
    http_server.routes["/pdf"] = (200, {"Content-Type": "application/pdf"}, b"%PDF-1.4")
    with pytest.raises(NonHtmlContent):
        fetch_page(http_server.url("/pdf"), fast_policy())


def test_plain_text_accepted(http_server):
    http_server.routes["/t"] = (200, {"Content-Type": "text/plain; charset=utf-8"}, "纯文本  a<b\n".encode())
    doc = fetch_page(http_server.url("/t"), fast_policy())
    assert doc.body_text == "纯文本 a＜b"
    assert extract_text(doc.body_text.encode()) == doc.body_text


def test_http_error_is_transport_failure(http_server):
    with pytest.raises(TransportFailure):
        fetch_page(http_server.url("/missing"), fast_policy())


def test_connection_refused_is_transport_failure():
    with pytest.raises(TransportFailure):
        fetch_page("http://127.0.0.1:9/", fast_policy(timeout=1.0))


def test_timeout(http_server):
    def slow(_h):
        time.sleep(1.0)
        return 200, HTML, b"<p>late</p>"

    http_server.routes["/slow"] = slow
    with pytest.raises((Timeout, TransportFailure)):
        fetch_page(http_server.url("/slow"), fast_policy(timeout=0.2))


def test_user_agent_sent(http_server):
    http_server.routes["/p"] = (200, HTML, b"<p>x</p>")
    fetch_page(http_server.url("/p"), fast_policy(user_agent="probe-agent/9"))
    assert http_server.requests[-1][1]["User-Agent"] == "probe-agent/9"


def test_robots_respected(http_server):
    http_server.routes["/robots.txt"] = (200, {"Content-Type": "text/plain"}, b"User-agent: *\nDisallow: /private\n")
    http_server.routes["/private/x"] = (200, HTML, b"<p>secret</p>")
    http_server.routes["/public"] = (200, HTML, b"<p>ok</p>")
    f = Fetcher(fast_policy(respect_robots=True))
    assert f.fetch(http_server.url("/public")).body_text == "ok"
    with pytest.raises(RobotsDisallowed):
        f.fetch(http_server.url("/private/x"))
    assert Fetcher(fast_policy(respect_robots=False)).fetch(http_server.url("/private/x")).body_text == "secret"


def test_rejects_non_http_url():
    with pytest.raises(TransportFailure):
        fetch_page("ftp://example.com/x", fast_policy())


def test_rate_limiter_spaces_requests_per_host():
    now = [100.0]
    limiter = HostRateLimiter(1.0, clock=lambda: now[0])
    assert limiter.reserve("a.example") == 0
    assert limiter.reserve("a.example") == pytest.approx(1.0)
    assert limiter.reserve("a.example") == pytest.approx(2.0)
    assert limiter.reserve("b.example") == 0
    now[0] = 110.0
    assert limiter.reserve("a.example") == 0


def test_policy_validation():
    with pytest.raises(ValueError):
        FetchPolicy(timeout=0)
    with pytest.raises(ValueError):
        FetchPolicy(max_body_bytes=0)
    with pytest.raises(ValueError):
        FetchPolicy(max_redirects=-1)


def test_host_of():
    assert host_of("https://WWW.Example.COM./path") == "www.example.com"
    assert host_of("not a url") == ""


def test_page_document_roundtrip():
    from datetime import datetime, timezone

    doc = PageDocument.create("http://Blog.Boxun.com/x", "文本", datetime(2018, 1, 1, tzinfo=timezone.utc), 10)
    assert doc.host == "blog.boxun.com"
    assert PageDocument.from_dict(doc.to_dict()) == doc
