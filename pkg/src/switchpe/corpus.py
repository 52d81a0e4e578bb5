"""Corpus parsing, vocabularies, tf-idf statistics, and synthetic data.

The on-disk format is UTF-8 text with blank-line-separated records. Each
record is a meta line ("meta" TAB uid TAB sentiment) followed by one line per
token (surface TAB rawtag). Space-separated lines are tolerated on input; the
serializer always emits tabs.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, ParseError
from .switchpoints import EN, HI, OTHER, SPIVariant, detect_switch_points, spi

LABELS = ("negative", "neutral", "positive")
LABEL_INDEX = {name: i for i, name in enumerate(LABELS)}

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD_ID = 0
UNK_ID = 1

MAX_LEN = 48


@dataclass(frozen=True)
class Token:
    surface: str
    tag: str  # HI, EN, or OTHER


@dataclass(frozen=True)
class Sentence:
    uid: str
    tokens: tuple
    sentiment: str

    @property
    def surfaces(self):
        return [t.surface for t in self.tokens]

    @property
    def tags(self):
        return [t.tag for t in self.tokens]

    @property
    def label(self):
        return LABEL_INDEX[self.sentiment]


def normalize_tag(raw):
    """Map a raw corpus tag onto HI / EN / OTHER (total, case-insensitive)."""
    low = str(raw).strip().lower()
    if low in ("hin", "hi"):
        return HI
    if low in ("eng", "en"):
        return EN
    return OTHER


def _split_line(line):
    if "\t" in line:
        return [p for p in line.split("\t") if p != ""]
    return line.split()


def parse_corpus_text(text, max_len=MAX_LEN):
    """Parse corpus records from a string. See module docstring for format.

    Sentences longer than max_len keep only their first max_len tokens;
    pass max_len=None to disable truncation.
    """
    sentences = []
    meta = None
    meta_line_no = None
    tokens = []

    def flush(line_no):
        nonlocal meta, tokens
        if meta is None:
            return
        if not tokens:
            raise ParseError(f"record '{meta[0]}' has no tokens", line=meta_line_no)
        kept = tokens if max_len is None else tokens[:max_len]
        sentences.append(Sentence(uid=meta[0], tokens=tuple(kept), sentiment=meta[1]))
        meta = None
        tokens = []

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r\n")
        if line.strip() == "":
            flush(line_no)
            continue
        parts = _split_line(line)
        if parts and parts[0] == "meta":
            if meta is not None:
                raise ParseError("meta line inside an open record "
                                 "(missing blank separator?)", line=line_no)
            if len(parts) != 3:
                raise ParseError(f"meta line needs uid and sentiment, got {len(parts)} fields",
                                 line=line_no)
            _, uid, sentiment = parts
            if sentiment not in LABELS:
                raise ParseError(f"unknown sentiment '{sentiment}' "
                                 f"(expected one of {', '.join(LABELS)})", line=line_no)
            meta = (uid, sentiment)
            meta_line_no = line_no
        else:
            if meta is None:
                raise ParseError("token line before any meta line", line=line_no)
            if len(parts) != 2:
                raise ParseError(f"token line needs surface and tag, got {len(parts)} fields",
                                 line=line_no)
            tokens.append(Token(surface=parts[0], tag=normalize_tag(parts[1])))
    flush(line_no=None)
    return sentences


def parse_corpus(path, max_len=MAX_LEN):
    with open(path, encoding="utf-8") as fh:
        return parse_corpus_text(fh.read(), max_len=max_len)


def serialize_corpus_text(sentences):
    lines = []
    for s in sentences:
        lines.append(f"meta\t{s.uid}\t{s.sentiment}")
        for t in s.tokens:
            lines.append(f"{t.surface}\t{t.tag}")
        lines.append("")
    return "\n".join(lines) + ("\n" if lines else "")


def serialize_corpus(sentences, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_corpus_text(sentences))


# ---------------------------------------------------------------------------
# vocabulary
# ---------------------------------------------------------------------------


class Vocab:
    """Lowercased surface-to-id map with reserved PAD (0) and UNK (1) rows."""

    def __init__(self, id_to_token):
        if id_to_token[:2] != [PAD_TOKEN, UNK_TOKEN]:
            raise ConfigError("vocab must reserve id 0 for PAD and id 1 for UNK")
        self.id_to_token = list(id_to_token)
        self.token_to_id = {t: i for i, t in enumerate(self.id_to_token)}

    def __len__(self):
        return len(self.id_to_token)

    def __contains__(self, surface):
        return surface.lower() in self.token_to_id

    def id_of(self, surface):
        return self.token_to_id.get(surface.lower(), UNK_ID)

    def encode(self, surfaces):
        return [self.id_of(s) for s in surfaces]


def build_vocab(sentences, min_count=1):
    """Count lowercased surfaces; keep those with frequency >= min_count.

    Retained tokens are id-ordered by descending frequency, ties broken
    lexicographically. Everything else maps to UNK.
    """
    if min_count < 1:
        raise ConfigError(f"min_count must be >= 1, got {min_count}")
    counts = Counter()
    for s in sentences:
        for t in s.tokens:
            low = t.surface.lower()
            if low not in (PAD_TOKEN, UNK_TOKEN):
                counts[low] += 1
    kept = sorted(
        (t for t, c in counts.items() if c >= min_count),
        key=lambda t: (-counts[t], t),
    )
    return Vocab([PAD_TOKEN, UNK_TOKEN] + kept)


# ---------------------------------------------------------------------------
# tf-idf
# ---------------------------------------------------------------------------


class TfIdfModel:
    """Smoothed idf statistics over vocab ids: idf = ln((1+N)/(1+df)) + 1.

    Document frequency is counted over vocab-mapped ids, so every token
    below the vocab cut contributes to UNK's frequency and unknown terms at
    scoring time reuse UNK's idf.
    """

    def __init__(self, n_docs, df_by_id, vocab_size):
        self.n_docs = int(n_docs)
        self.vocab_size = int(vocab_size)
        self.df = np.zeros(vocab_size, dtype=np.int64)
        for i, c in df_by_id.items():
            self.df[int(i)] = int(c)

    def idf(self, token_id):
        return float(np.log((1.0 + self.n_docs) / (1.0 + self.df[token_id])) + 1.0)

    def idf_vector(self):
        return np.log((1.0 + self.n_docs) / (1.0 + self.df)) + 1.0


def build_tfidf(sentences, vocab):
    """Document frequencies over the given sentences (training split only)."""
    df = Counter()
    for s in sentences:
        for token_id in set(vocab.encode(s.surfaces)):
            df[token_id] += 1
    return TfIdfModel(n_docs=len(sentences), df_by_id=df, vocab_size=len(vocab))


def tfidf_weights(ids, model):
    """Per-position weight tf(id in this sentence) * idf(id)."""
    ids = list(ids)
    tf = Counter(ids)
    return np.array([tf[i] * model.idf(i) for i in ids], dtype=np.float64)


# ---------------------------------------------------------------------------
# synthetic corpora
# ---------------------------------------------------------------------------

RULE_RANDOM = "random_balanced"
RULE_SP = "sp_determined"


@dataclass
class SynthConfig:
    """Knobs for the deterministic synthetic corpus generator.

    Sentence lengths are uniform over [mean_len - len_spread,
    mean_len + len_spread]. ``shared_frac`` is the probability that a
    surface is drawn from the language-neutral shared pool instead of the
    tag's own pool; at 1.0 surfaces carry no language information at all,
    so only the tag sequence can predict an sp-determined label.
    """

    n_sentences: int = 300
    hi_vocab: int = 40
    en_vocab: int = 40
    shared_vocab: int = 60
    shared_frac: float = 0.5
    mean_len: int = 12
    len_spread: int = 3
    switch_prob: float = 0.3
    label_rule: str = RULE_SP
    sp_run_threshold: int = 5


def sp_determined_label(tags, run_threshold=5):
    """Pure function from a tag sequence to a sentiment label.

    No switching points at all reads as neutral. Otherwise the longest
    stretch of positions since a reset decides: a RESET_ALL index reaching
    run_threshold means some monolingual run is long (positive); staying
    below it means the languages churn rapidly (negative).
    """
    if not detect_switch_points(tags):
        return "neutral"
    top = max(spi(tags, SPIVariant.RESET_ALL).indices)
    return "positive" if top >= run_threshold else "negative"


def _short_runs(total, rng):
    """Partition ``total`` into parts of size 1..3."""
    parts = []
    rem = total
    while rem > 0:
        k = int(min(rng.integers(1, 4), rem))
        parts.append(k)
        rem -= k
    return parts


def _tags_for_label(label, length, start, threshold, rng):
    """Build a tag sequence whose sp-determined label is ``label``.

    Positive sentences place the long run strictly inside the sentence so
    a switch flanks it on both sides, and each flank widens to two tokens
    whenever the length budget allows; a lone edge token is never the only
    evidence that switching happened.
    """
    flip = {HI: EN, EN: HI}
    if label == "neutral":
        return [start] * length
    if label == "negative":
        runs = _short_runs(length, rng)
    else:  # positive: one interior run pushes the index past the threshold
        fat = length >= threshold + 6
        top = length - 4 if fat else length - 2
        long_run = int(rng.integers(threshold + 2, top + 1))
        rem = length - long_run
        left = int(rng.integers(2, rem - 1)) if rem >= 4 else int(rng.integers(1, rem))
        runs = _short_runs(left, rng) + [long_run] + _short_runs(rem - left, rng)
    tags, lang = [], start
    for r in runs:
        tags.extend([lang] * r)
        lang = flip[lang]
    return tags


def _surface(tag, cfg, rng):
    if rng.random() < cfg.shared_frac:
        return f"w{int(rng.integers(0, cfg.shared_vocab))}"
    if tag == HI:
        return f"hi{int(rng.integers(0, cfg.hi_vocab))}"
    return f"en{int(rng.integers(0, cfg.en_vocab))}"


def generate_synthetic(cfg, seed):
    """Deterministic synthetic code-mixed corpus with balanced labels.

    Under ``sp_determined`` each sentence's tag run structure is constructed
    for its target label and the stored sentiment is recomputed from the
    tags, so the label is a pure function of the tag sequence. Under
    ``random_balanced`` tags follow a two-state chain driven by switch_prob
    and labels are assigned round-robin, independent of content.
    """
    if not 0.0 <= cfg.switch_prob <= 1.0:
        raise ConfigError(f"switch_prob must lie in [0, 1], got {cfg.switch_prob}")
    if not 0.0 <= cfg.shared_frac <= 1.0:
        raise ConfigError(f"shared_frac must lie in [0, 1], got {cfg.shared_frac}")
    if cfg.label_rule not in (RULE_RANDOM, RULE_SP):
        raise ConfigError(f"unknown label rule '{cfg.label_rule}'")
    if min(cfg.hi_vocab, cfg.en_vocab, cfg.shared_vocab) < 1:
        raise ConfigError("vocab sizes must be >= 1")
    lo = cfg.mean_len - cfg.len_spread
    hi = cfg.mean_len + cfg.len_spread
    if lo < 2:
        raise ConfigError(f"minimum length must be >= 2, got {lo}")
    if cfg.label_rule == RULE_SP and lo < cfg.sp_run_threshold + 4:
        raise ConfigError(
            f"sp-determined labels need min length >= {cfg.sp_run_threshold + 4}, got {lo}")

    rng = np.random.default_rng(seed)
    flip = {HI: EN, EN: HI}
    sentences = []
    for i in range(cfg.n_sentences):
        target = LABELS[i % 3]
        length = int(rng.integers(lo, hi + 1))
        start = HI if rng.random() < 0.5 else EN
        if cfg.label_rule == RULE_SP:
            tags = _tags_for_label(target, length, start, cfg.sp_run_threshold, rng)
            sentiment = sp_determined_label(tags, cfg.sp_run_threshold)
            if sentiment != target:
                raise DataError(f"generator produced tags with label {sentiment}, "
                                f"wanted {target}")
        else:
            tags, lang = [start], start
            for _ in range(length - 1):
                if rng.random() < cfg.switch_prob:
                    lang = flip[lang]
                tags.append(lang)
            sentiment = target
        tokens = tuple(Token(surface=_surface(t, cfg, rng), tag=t) for t in tags)
        sentences.append(Sentence(uid=f"syn{i:05d}", tokens=tokens, sentiment=sentiment))
    return sentences


# ---------------------------------------------------------------------------
# splits
# ---------------------------------------------------------------------------


def split(sentences, fractions, seed):
    """Stratified (train, dev, test) split with a deterministic shuffle."""
    if len(fractions) != 3:
        raise ConfigError(f"need exactly three fractions, got {len(fractions)}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"fractions must sum to 1, got {sum(fractions)}")
    rng = np.random.default_rng(seed)
    buckets = ([], [], [])
    for label in LABELS:
        members = [s for s in sentences if s.sentiment == label]
        order = rng.permutation(len(members))
        members = [members[int(j)] for j in order]
        n = len(members)
        b1 = round(fractions[0] * n)
        b2 = round((fractions[0] + fractions[1]) * n)
        buckets[0].extend(members[:b1])
        buckets[1].extend(members[b1:b2])
        buckets[2].extend(members[b2:])
    return buckets
