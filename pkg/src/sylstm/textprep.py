"""Tweet normalization pipeline.

Six rules applied in a fixed order: username replacement, URL replacement,
hashtag segmentation, emoticon/emoji normalization, compound-word splitting
and word-lengthening reduction. The cleaned text is lowercased and
whitespace-normalized at the end. All rules are pure functions over the
bundled resource tables, so the pipeline is deterministic and thread-safe
after a one-time resource load.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources


class ResourceError(Exception):
    """A bundled resource table is missing or malformed."""


@dataclass(frozen=True)
class CleanTweet:
    text: str
    applied_rules: tuple[str, ...]


_USERNAME_RE = re.compile(r"@\w+")
_URL_RE = re.compile(r"(?:https?://|www\.)\S+")
_HASHTAG_RE = re.compile(r"#(\w+)")
_LENGTHENING_RE = re.compile(r"(.)\1{2,}")
_ALPHA_RE = re.compile(r"[A-Za-z]+$")
_WS_RE = re.compile(r"\s+")


def _data_text(name: str) -> str:
    return resources.files("sylstm.data").joinpath(name).read_text("utf-8")


@lru_cache(maxsize=None)
def load_emoticon_map(path: str | None = None) -> tuple[tuple[str, str], ...]:
    """Emoticon -> phrase pairs, longest emoticon first.

    Reads the bundled table unless an explicit path is given. Malformed
    rows raise ResourceError at load time.
    """
    text = open(path, encoding="utf-8").read() if path else _data_text("emoticons.tsv")
    pairs = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) != 2 or not cols[0] or not cols[1]:
            raise ResourceError(f"emoticon table line {lineno}: expected 'emoticon<TAB>phrase'")
        pairs.append((cols[0], cols[1]))
    return tuple(sorted(pairs, key=lambda p: -len(p[0])))


@lru_cache(maxsize=None)
def load_word_frequencies(path: str | None = None) -> dict[str, float]:
    """word -> log relative frequency, from the bundled unigram list."""
    text = open(path, encoding="utf-8").read() if path else _data_text("wordfreq.tsv")
    counts: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) != 2:
            raise ResourceError(f"word frequency list line {lineno}: expected 'word<TAB>count'")
        try:
            counts[cols[0]] = int(cols[1])
        except ValueError:
            raise ResourceError(f"word frequency list line {lineno}: bad count {cols[1]!r}")
    if not counts:
        raise ResourceError("word frequency list is empty")
    total = sum(counts.values())
    return {w: math.log(c / total) for w, c in counts.items()}


def replace_usernames(text: str) -> str:
    """Replace every @handle with the literal '@user'."""
    return _USERNAME_RE.sub("@user", text)


def replace_urls(text: str) -> str:
    """Replace every http(s):// or www. URL with the literal token 'url'."""
    return _URL_RE.sub("url", text)


def _segment_token(token: str, logfreq: dict[str, float]) -> list[str] | None:
    """Best full segmentation of token into dictionary words, or None.

    Dynamic program maximizing the sum of log relative frequencies of the
    parts. Parts must be dictionary words of length >= 2 (plus 'a'/'i').
    """
    n = len(token)
    best: list[float | None] = [None] * (n + 1)
    back = [0] * (n + 1)
    best[0] = 0.0
    for j in range(1, n + 1):
        for i in range(j):
            if best[i] is None:
                continue
            part = token[i:j]
            if len(part) == 1 and part not in ("a", "i"):
                continue
            score = logfreq.get(part)
            if score is None:
                continue
            cand = best[i] + score
            if best[j] is None or cand > best[j]:
                best[j] = cand
                back[j] = i
    if best[n] is None:
        return None
    parts: list[str] = []
    j = n
    while j > 0:
        i = back[j]
        parts.append(token[i:j])
        j = i
    parts.reverse()
    return parts


def split_compounds(text: str, frequencies: dict[str, float] | None = None) -> str:
    """Segment out-of-dictionary alphabetic tokens into dictionary words.

    Tokens already in the dictionary, non-alphabetic tokens and tokens with
    no full in-dictionary segmentation pass through unchanged.
    """
    logfreq = frequencies if frequencies is not None else load_word_frequencies()
    out = []
    for token in text.split(" "):
        lower = token.lower()
        if _ALPHA_RE.match(token) and lower not in logfreq:
            parts = _segment_token(lower, logfreq)
            if parts is not None:
                out.append(" ".join(parts))
                continue
        out.append(token)
    return " ".join(out)


def segment_hashtags(text: str, frequencies: dict[str, float] | None = None) -> str:
    """Split '#tag' into '# tag', passing the tag body through split_compounds."""
    def repl(m: re.Match) -> str:
        return "# " + split_compounds(m.group(1), frequencies)
    return _HASHTAG_RE.sub(repl, text)


def normalize_emojis(text: str, mapping: tuple[tuple[str, str], ...] | None = None) -> str:
    """Replace mapped emoticons/emoji with their phrases (longest match first)."""
    table = mapping if mapping is not None else load_emoticon_map()
    for emo, phrase in table:
        if emo in text:
            text = text.replace(emo, f" {phrase} ")
    return _WS_RE.sub(" ", text).strip()


def reduce_lengthening(text: str) -> str:
    """Cap any run of 3+ identical characters at exactly 2 ('!!!!' -> '!!')."""
    return _LENGTHENING_RE.sub(r"\1\1", text)


_RULES = (
    ("replace_usernames", replace_usernames),
    ("replace_urls", replace_urls),
    ("segment_hashtags", segment_hashtags),
    ("normalize_emojis", normalize_emojis),
    ("split_compounds", split_compounds),
    ("reduce_lengthening", reduce_lengthening),
)


def preprocess(text: str) -> CleanTweet:
    """Run the full pipeline and record which rules changed the text.

    Raises ValueError on input that is empty after stripping whitespace.
    Output is lowercased and whitespace-normalized.
    """
    if not text.strip():
        raise ValueError("tweet is empty after stripping whitespace")
    applied = []
    for name, rule in _RULES:
        new = rule(text)
        if new != text:
            applied.append(name)
        text = new
    text = _WS_RE.sub(" ", text).strip().lower()
    return CleanTweet(text=text, applied_rules=tuple(applied))
