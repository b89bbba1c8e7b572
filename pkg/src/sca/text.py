"""Document cleaning, tokenization, vocabulary, and corpus I/O.

Cleaning removes URLs, @-mentions, #-hashtags, emoji, and symbols, keeping
unicode letters, digits, whitespace, and intra-word apostrophes. Tokens come
from unicode word segmentation with a single-character fallback for CJK runs.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigurationError

_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_MENTION_RE = re.compile(r"@\w+")
_HASHTAG_RE = re.compile(r"#\w+")
# pictographs, emoticons, transport, supplemental symbols, dingbats,
# regional indicators, variation selectors, zero-width joiner
_EMOJI_RE = re.compile(
    "["
    "\U0001F000-\U0001FAFF"
    "\U00002600-\U000027BF"
    "\U00002B00-\U00002BFF"
    "\U0000FE00-\U0000FE0F"
    "\U0000200D"
    "]+"
)
# anything that is not a word character, whitespace, or apostrophe;
# underscores count as symbols here
_SYMBOL_RE = re.compile(r"[^\w\s']|_")
_DANGLING_APOSTROPHE_RE = re.compile(r"(?<!\w)'|'(?!\w)")
_WS_RE = re.compile(r"\s+")

_TOKEN_RE = re.compile(r"\w+(?:'\w+)*")

# unified ideographs (+ext A), compatibility ideographs, kana
_CJK_RANGES = (
    (0x4E00, 0x9FFF),
    (0x3400, 0x4DBF),
    (0xF900, 0xFAFF),
    (0x3040, 0x30FF),
)


class CorpusError(ValueError):
    """Raised for malformed document inputs."""


class VocabularyError(ConfigurationError):
    """Raised when vocabulary construction yields nothing usable."""


def preprocess_text(raw: str) -> str:
    """Strip URLs, mentions, hashtags, emoji, and symbols; collapse spaces.

    Applying the function twice gives the same result as applying it once.
    """
    text = _URL_RE.sub(" ", raw)
    text = _MENTION_RE.sub(" ", text)
    text = _HASHTAG_RE.sub(" ", text)
    text = _EMOJI_RE.sub(" ", text)
    text = _SYMBOL_RE.sub(" ", text)
    text = _DANGLING_APOSTROPHE_RE.sub("", text)
    return _WS_RE.sub(" ", text).strip()


def _is_cjk(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _CJK_RANGES)


def _split_cjk(token: str) -> list[str]:
    """Break CJK runs into single characters, keeping other runs whole."""
    if not any(_is_cjk(ch) for ch in token):
        return [token]
    out: list[str] = []
    buf: list[str] = []
    for ch in token:
        if _is_cjk(ch):
            if buf:
                out.append("".join(buf))
                buf = []
            out.append(ch)
        else:
            buf.append(ch)
    if buf:
        out.append("".join(buf))
    return out


def tokenize(clean: str, lowercase: bool = True) -> list[str]:
    """Unicode word segmentation with single-character CJK fallback."""
    if lowercase:
        clean = clean.lower()
    tokens: list[str] = []
    for match in _TOKEN_RE.finditer(clean):
        tokens.extend(_split_cjk(match.group()))
    return tokens


@dataclass
class DocumentCorpus:
    """Parallel id/text/token views of one document collection."""

    ids: list[str]
    raw_texts: list[str]
    clean_texts: list[str]
    tokens: list[list[str]]
    labels: list[str] | None = None

    def __post_init__(self) -> None:
        n = len(self.ids)
        if not (len(self.raw_texts) == len(self.clean_texts) == len(self.tokens) == n):
            raise CorpusError("corpus id/text/token sequences differ in length")
        if self.labels is not None and len(self.labels) != n:
            raise CorpusError("corpus labels differ in length from documents")
        if len(set(self.ids)) != n:
            raise CorpusError("document ids are not unique")

    def __len__(self) -> int:
        return len(self.ids)

    @classmethod
    def from_texts(
        cls,
        ids: list[str],
        texts: list[str],
        labels: list[str] | None = None,
        lowercase: bool = True,
        stopwords: set[str] | None = None,
    ) -> "DocumentCorpus":
        clean = [preprocess_text(t) for t in texts]
        toks = [tokenize(c, lowercase=lowercase) for c in clean]
        if stopwords:
            toks = [[t for t in doc if t not in stopwords] for doc in toks]
        return cls(list(ids), list(texts), clean, toks, labels)


def load_corpus_jsonl(
    path: str | Path,
    lowercase: bool = True,
    stopwords: set[str] | None = None,
) -> DocumentCorpus:
    """Read documents from JSON lines with ``id``/``text`` (+optional ``label``)."""
    ids: list[str] = []
    texts: list[str] = []
    labels: list[str] = []
    saw_label = False
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if "id" not in obj or "text" not in obj:
                raise CorpusError(f"{path}:{lineno}: object needs 'id' and 'text'")
            ids.append(str(obj["id"]))
            texts.append(str(obj["text"]))
            if "label" in obj:
                saw_label = True
                labels.append(str(obj["label"]))
            else:
                labels.append("")
    if not ids:
        raise CorpusError(f"{path}: no documents")
    return DocumentCorpus.from_texts(
        ids,
        texts,
        labels=labels if saw_label else None,
        lowercase=lowercase,
        stopwords=stopwords,
    )


def save_corpus_jsonl(corpus: DocumentCorpus, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for i, doc_id in enumerate(corpus.ids):
            obj: dict[str, str] = {"id": doc_id, "text": corpus.raw_texts[i]}
            if corpus.labels is not None:
                obj["label"] = corpus.labels[i]
            fh.write(json.dumps(obj, ensure_ascii=False, sort_keys=True) + "\n")


@dataclass
class Vocabulary:
    """Token index with per-token document frequencies."""

    token_to_index: dict[str, int]
    tokens: list[str]
    doc_freq: list[int]
    corpus_token_count: int
    n_documents: int = 0

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_index

    def df(self, token: str) -> int:
        idx = self.token_to_index.get(token)
        return 0 if idx is None else self.doc_freq[idx]


def build_vocabulary(corpus: DocumentCorpus, min_df: int = 2) -> Vocabulary:
    """Collect tokens appearing in at least ``min_df`` documents."""
    if len(corpus) == 0:
        raise VocabularyError("cannot build a vocabulary from an empty corpus")
    counts: dict[str, int] = {}
    total = 0
    for toks in corpus.tokens:
        total += len(toks)
        for tok in set(toks):
            counts[tok] = counts.get(tok, 0) + 1
    kept = sorted(tok for tok, df in counts.items() if df >= min_df)
    if not kept:
        raise VocabularyError(
            f"no token reaches min_df={min_df}; vocabulary would be empty"
        )
    return Vocabulary(
        token_to_index={tok: i for i, tok in enumerate(kept)},
        tokens=kept,
        doc_freq=[counts[tok] for tok in kept],
        corpus_token_count=total,
        n_documents=len(corpus),
    )
