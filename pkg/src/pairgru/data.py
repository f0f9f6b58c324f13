"""Word-embedding loading, paraphrase-pair filtering, splits and task datasets.

File formats (all UTF-8, LF output):
  * embeddings  — optional "<vocab> <dim>" header line, then "word v1 ... v_dim"
  * ppdb rows   — fields separated by the exact delimiter " ||| ";
                  fields 0..2 are label, phrase, paraphrase
  * pairs cache — TSV "p1<TAB>p2"
  * semeval     — TSV "phrase_a<TAB>phrase_b<TAB>{1|0}"
  * turney      — TSV "bigram<TAB>c1..c5<TAB>answer_index"
"""

import re
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import FormatError, OutOfVocabularyError
from .numeric import seeded_rng

__all__ = [
    "EmbeddingTable",
    "ParaphrasePair",
    "PpdbRecord",
    "SemEvalExample",
    "TurneyExample",
    "Turney10Item",
    "SplitSpec",
    "FilterReport",
    "load_embeddings",
    "parse_ppdb_line",
    "read_ppdb_pairs",
    "is_clean_phrase",
    "filter_pairs",
    "split_dataset",
    "subsample_training",
    "load_semeval",
    "load_turney",
    "build_turney10",
    "distinct_phrases",
    "write_pairs_tsv",
    "read_pairs_tsv",
]

PPDB_DELIMITER = " ||| "

# letters and single spaces, no leading/trailing space
_CLEAN_PHRASE = re.compile(r"[A-Za-z]+( [A-Za-z]+)*")


class ParaphrasePair(NamedTuple):
    p1: str
    p2: str


@dataclass
class PpdbRecord:
    lhs_label: str
    phrase: str
    paraphrase: str
    raw_features: str = ""
    remainder: str = ""


@dataclass
class SemEvalExample:
    phrase_a: str
    phrase_b: str
    label: bool


@dataclass
class TurneyExample:
    bigram: str
    candidates: list
    answer_index: int


class Turney10Item(NamedTuple):
    phrase: str
    candidate: str
    is_correct: bool


@dataclass
class SplitSpec:
    train_fraction: float = 0.8
    dev_fraction: float = 0.1
    test_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        fracs = (self.train_fraction, self.dev_fraction, self.test_fraction)
        if any(f < 0 for f in fracs):
            raise ValueError(f"split fractions must be >= 0, got {fracs}")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must sum to 1, got {sum(fracs)}")


@dataclass
class FilterReport:
    """Per-rule rejection counts from filter_pairs."""

    input_pairs: int = 0
    identical: int = 0      # rule 1: p1 == p2
    non_letter: int = 0     # rule 2: characters other than ASCII letters and single spaces
    out_of_vocab: int = 0   # rule 3: a word missing from the embedding table
    both_single: int = 0    # rule 4: both sides are single words
    duplicates: int = 0     # exact or symmetric duplicates of an earlier kept pair
    kept: int = 0


@dataclass
class EmbeddingTable:
    """Frozen word -> vector map plus the case policy it was built with."""

    dim: int
    vectors: dict
    lowercase: bool = True
    duplicates_skipped: int = 0

    def __contains__(self, word):
        return word in self.vectors

    def __len__(self):
        return len(self.vectors)

    def normalize(self, phrase):
        return phrase.lower() if self.lowercase else phrase

    def tokenize(self, phrase):
        return self.normalize(phrase).split()

    def phrase_vectors(self, phrase):
        """Token vectors for a phrase; raises OutOfVocabularyError listing misses."""
        words = self.tokenize(phrase)
        if not words:
            raise ValueError(f"phrase {phrase!r} has no tokens")
        missing = [w for w in words if w not in self.vectors]
        if missing:
            raise OutOfVocabularyError(missing)
        return [self.vectors[w] for w in words]

    def phrase_in_vocab(self, phrase):
        words = self.tokenize(phrase)
        return bool(words) and all(w in self.vectors for w in words)

    def copy(self):
        return EmbeddingTable(dim=self.dim,
                              vectors={w: v.copy() for w, v in self.vectors.items()},
                              lowercase=self.lowercase,
                              duplicates_skipped=self.duplicates_skipped)


def _looks_like_header(parts):
    if len(parts) != 2:
        return False
    try:
        return int(parts[0]) > 0 and int(parts[1]) > 0
    except ValueError:
        return False


def load_embeddings(path, expected_dim=None, lowercase=True):
    """Parse a text embedding file into an EmbeddingTable.

    Duplicate words keep their first vector; the skip count is recorded on
    the table. Dimension mismatches and unparsable floats raise FormatError
    naming the offending line.
    """
    vectors = {}
    dim = expected_dim
    duplicates = 0
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            parts = line.split()
            if line_no == 1 and _looks_like_header(parts):
                header_dim = int(parts[1])
                if dim is not None and header_dim != dim:
                    raise FormatError(f"{path}:1: header dim {header_dim} != expected {dim}")
                dim = header_dim
                continue
            word, values = parts[0], parts[1:]
            if dim is not None and len(values) != dim:
                raise FormatError(f"{path}:{line_no}: expected {dim} values, found {len(values)}")
            if not values:
                raise FormatError(f"{path}:{line_no}: no vector values")
            try:
                vec = np.array([float(v) for v in values], dtype=np.float64)
            except ValueError as exc:
                raise FormatError(f"{path}:{line_no}: {exc}") from None
            if dim is None:
                dim = len(values)
            if lowercase:
                word = word.lower()
            if word in vectors:
                duplicates += 1
                continue
            vectors[word] = vec
    if not vectors:
        raise FormatError(f"{path}: no embedding vectors found")
    return EmbeddingTable(dim=dim, vectors=vectors, lowercase=lowercase,
                          duplicates_skipped=duplicates)


def parse_ppdb_line(line):
    """Split one paraphrase-database row on the exact ' ||| ' delimiter."""
    fields = line.split(PPDB_DELIMITER)
    if len(fields) < 3:
        raise FormatError(f"expected at least 3 ' ||| '-separated fields, found {len(fields)}")
    return PpdbRecord(
        lhs_label=fields[0],
        phrase=fields[1],
        paraphrase=fields[2],
        raw_features=fields[3] if len(fields) > 3 else "",
        remainder=PPDB_DELIMITER.join(fields[4:]),
    )


def read_ppdb_pairs(path):
    """All (phrase, paraphrase) rows of a paraphrase-database file, unfiltered."""
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line:
                continue
            try:
                record = parse_ppdb_line(line)
            except FormatError as exc:
                raise FormatError(f"{path}:{line_no}: {exc}") from None
            pairs.append(ParaphrasePair(record.phrase, record.paraphrase))
    return pairs


def is_clean_phrase(phrase):
    """True iff the phrase is ASCII letters in single-space-separated words."""
    return _CLEAN_PHRASE.fullmatch(phrase) is not None


def filter_pairs(pairs, vocab):
    """Apply the four paraphrase filter rules, then drop duplicate pairs.

    Each rejected pair is attributed to the first rule it violates, in order:
    identical sides, non-letter characters, out-of-vocabulary words, both
    sides single words. Surviving pairs are normalized per the table's case
    policy; exact and symmetric duplicates of an earlier kept pair are then
    dropped. Filtering is idempotent.
    """
    report = FilterReport(input_pairs=len(pairs))
    kept = []
    seen = set()
    for pair in pairs:
        p1 = vocab.normalize(pair[0])
        p2 = vocab.normalize(pair[1])
        if p1 == p2:
            report.identical += 1
            continue
        if not (is_clean_phrase(p1) and is_clean_phrase(p2)):
            report.non_letter += 1
            continue
        words1, words2 = p1.split(" "), p2.split(" ")
        if any(w not in vocab for w in words1 + words2):
            report.out_of_vocab += 1
            continue
        if len(words1) == 1 and len(words2) == 1:
            report.both_single += 1
            continue
        key = (p1, p2) if p1 <= p2 else (p2, p1)
        if key in seen:
            report.duplicates += 1
            continue
        seen.add(key)
        kept.append(ParaphrasePair(p1, p2))
    report.kept = len(kept)
    return kept, report


def split_dataset(pairs, spec):
    """Deterministic shuffle then contiguous train/dev/test slices.

    Dev and test sizes round down; the remainder goes to train. The three
    parts are disjoint and exhaustive.
    """
    if not pairs:
        raise ValueError("cannot split an empty dataset")
    n = len(pairs)
    order = seeded_rng(spec.seed).permutation(n)
    shuffled = [pairs[i] for i in order]
    dev_n = int(n * spec.dev_fraction)
    test_n = int(n * spec.test_fraction)
    train_n = n - dev_n - test_n
    return (shuffled[:train_n],
            shuffled[train_n:train_n + dev_n],
            shuffled[train_n + dev_n:])


def subsample_training(pairs, fraction, seed):
    """Uniform subsample of floor(fraction * n) pairs, in original order."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    if fraction == 1.0:
        return list(pairs)
    n = len(pairs)
    m = int(fraction * n)
    if m == 0:
        raise ValueError(f"fraction {fraction} of {n} pairs leaves nothing to train on")
    picked = seeded_rng(seed).choice(n, size=m, replace=False)
    return [pairs[i] for i in sorted(picked)]


def load_semeval(path):
    """Binary phrase-similarity examples from TSV rows 'a<TAB>b<TAB>{1|0}'."""
    examples = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise FormatError(f"{path}:{line_no}: expected 3 tab-separated fields, found {len(fields)}")
            a, b, label = fields
            if not a or not b:
                raise FormatError(f"{path}:{line_no}: empty phrase")
            if label not in ("0", "1"):
                raise FormatError(f"{path}:{line_no}: label must be 0 or 1, got {label!r}")
            examples.append(SemEvalExample(phrase_a=a, phrase_b=b, label=label == "1"))
    return examples


def load_turney(path):
    """Bigram multiple-choice examples from TSV rows 'bigram<TAB>c1..c5<TAB>answer'."""
    examples = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 7:
                raise FormatError(f"{path}:{line_no}: expected 7 tab-separated fields, found {len(fields)}")
            bigram, candidates, answer = fields[0], fields[1:6], fields[6]
            if len(bigram.split()) != 2:
                raise FormatError(f"{path}:{line_no}: bigram must be exactly two words, got {bigram!r}")
            if len(set(candidates)) != 5:
                raise FormatError(f"{path}:{line_no}: candidates must be 5 distinct words")
            try:
                answer_index = int(answer)
            except ValueError:
                raise FormatError(f"{path}:{line_no}: answer index {answer!r} is not an integer") from None
            if not 0 <= answer_index <= 4:
                raise FormatError(f"{path}:{line_no}: answer index {answer_index} out of range 0..4")
            examples.append(TurneyExample(bigram=bigram, candidates=list(candidates),
                                          answer_index=answer_index))
    return examples


def reverse_bigram(bigram):
    first, second = bigram.split()
    return f"{second} {first}"


def build_turney10(example):
    """Cross {original, reversed} bigram with the 5 candidates: 10 scored items.

    Enumeration order is the tie-break order: original orientation first,
    candidates in file order. Exactly one item (original bigram, answer
    candidate) is marked correct.
    """
    items = []
    for phrase, genuine in ((example.bigram, True), (reverse_bigram(example.bigram), False)):
        for i, cand in enumerate(example.candidates):
            items.append(Turney10Item(phrase=phrase, candidate=cand,
                                      is_correct=genuine and i == example.answer_index))
    return items


def distinct_phrases(*pair_lists):
    """Deduplicated phrases from both sides of the given pair lists, in first-seen order."""
    seen = {}
    for pairs in pair_lists:
        for p1, p2 in pairs:
            seen.setdefault(p1)
            seen.setdefault(p2)
    return list(seen)


def write_pairs_tsv(pairs, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p1, p2 in pairs:
            fh.write(f"{p1}\t{p2}\n")


def read_pairs_tsv(path):
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise FormatError(f"{path}:{line_no}: expected 2 tab-separated fields, found {len(fields)}")
            pairs.append(ParaphrasePair(fields[0], fields[1]))
    return pairs
