"""Exception types shared across the toolkit."""


class SstdError(Exception):
    """Base class for all toolkit errors."""


class UnsupportedFormat(SstdError):
    """Audio file is not a readable RIFF/WAVE PCM file."""


class ClipTooShort(SstdError):
    """Audio clip has fewer samples than one analysis window."""


class TooFewFrames(SstdError):
    """Feature matrix has too few frames for the requested operation."""


class DimensionMismatch(SstdError):
    """Two feature matrices have different coefficient dimensions."""


class EmptyInput(SstdError):
    """An operation received an empty feature matrix."""


class EmptyCollection(SstdError):
    """A search was requested over an empty utterance collection."""


class UnknownGrapheme(SstdError):
    """No table entry matches the text at the given position."""

    def __init__(self, text: str, position: int):
        self.text = text
        self.position = position
        self.character = text[position] if position < len(text) else ""
        super().__init__(
            f"no grapheme rule matches {text[position:position + 4]!r} "
            f"at position {position} in {text!r}"
        )


class UnknownPhone(SstdError):
    """A phone symbol has no grapheme rule in the table."""

    def __init__(self, symbol: str):
        self.symbol = symbol
        super().__init__(f"phone {symbol!r} not present in the mapping table")


class ParseError(SstdError):
    """A data file does not match its expected format."""

    def __init__(self, message: str, path: str = "", line: int = 0):
        self.path = path
        self.line = line
        prefix = f"{path}:{line}: " if path else ""
        super().__init__(prefix + message)


class DuplicateEntry(SstdError):
    """The same orthography appears more than once in a lexicon file."""

    def __init__(self, word: str):
        self.word = word
        super().__init__(f"duplicate lexicon entry {word!r}")


class InvariantViolation(SstdError):
    """A confusion-network slot violates a structural invariant."""

    def __init__(self, slot: int, reason: str):
        self.slot = slot
        self.reason = reason
        super().__init__(f"slot {slot}: {reason}")


class NetworkTooLarge(SstdError):
    """Confusion network exceeds the exhaustive-search size guard."""


class EmptyReference(SstdError):
    """Phone error rate requested against an empty reference sequence."""


class MissingSpeakerMetadata(SstdError):
    """Speaker analysis requested but exemplar speakers are unknown."""
