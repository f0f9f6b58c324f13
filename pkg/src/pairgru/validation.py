"""Input validation for the estimator API: phrase pairs in, phrase lists in."""

__all__ = ["check_phrase_pairs", "check_phrases"]


def check_phrase_pairs(X):
    """Coerce X to a list of (str, str) pairs or raise ValueError."""
    if isinstance(X, str):
        raise ValueError("expected a sequence of (phrase, phrase) pairs, got a single string")
    pairs = list(X)
    if not pairs:
        raise ValueError("no phrase pairs given")
    out = []
    for i, item in enumerate(pairs):
        if isinstance(item, str):
            raise ValueError(f"item {i} is a bare string, expected a (phrase, phrase) pair")
        try:
            seq = tuple(item)
        except TypeError:
            raise ValueError(f"item {i} is not a (phrase, phrase) pair: {item!r}") from None
        if len(seq) != 2 or not all(isinstance(p, str) for p in seq):
            raise ValueError(f"item {i} is not a (phrase, phrase) pair: {item!r}")
        if not seq[0].strip() or not seq[1].strip():
            raise ValueError(f"item {i} contains a blank phrase")
        out.append((seq[0], seq[1]))
    return out


def check_phrases(X):
    """Coerce X to a nonempty list of nonblank phrase strings or raise ValueError."""
    if isinstance(X, str):
        raise ValueError("expected a sequence of phrases, got a single string "
                         "(wrap it in a list)")
    phrases = list(X)
    if not phrases:
        raise ValueError("no phrases given")
    for i, p in enumerate(phrases):
        if not isinstance(p, str):
            raise ValueError(f"item {i} is not a string phrase: {p!r}")
        if not p.strip():
            raise ValueError(f"item {i} is a blank phrase")
    return phrases
