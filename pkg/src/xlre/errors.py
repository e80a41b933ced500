"""Exception hierarchy shared by every xlre module."""


class XLREError(Exception):
    """Base class for all package errors."""


# corpus

class MalformedRecord(XLREError):
    def __init__(self, line, reason=""):
        self.line = line
        super().__init__(f"malformed record at line {line}" + (f": {reason}" if reason else ""))


class UnknownType(XLREError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown type {name!r}")


class SpanOutOfRange(XLREError):
    def __init__(self, sentence_id, reason=""):
        self.sentence_id = sentence_id
        super().__init__(f"span out of range in sentence {sentence_id!r}" + (f": {reason}" if reason else ""))


class SchemaError(XLREError):
    pass


class BadRatios(XLREError):
    pass


class EmptySpec(XLREError):
    pass


# tokenizer

class TargetTooSmall(XLREError):
    def __init__(self, target, minimum):
        self.target = target
        self.minimum = minimum
        super().__init__(f"target vocabulary size {target} below minimum {minimum}")


class VocabularyError(XLREError):
    pass


# encoding

class EntitiesTooFar(XLREError):
    def __init__(self, required, max_len):
        self.required = required
        self.max_len = max_len
        super().__init__(f"marked entity spans need {required} pieces but max_len is {max_len}")


# transformer / head

class BadConfig(XLREError):
    pass


class SequenceTooLong(XLREError):
    pass


class IdOutOfRange(XLREError):
    pass


class PositionOutOfRange(XLREError):
    pass


class DimensionMismatch(XLREError):
    pass


class BadClass(XLREError):
    pass


# training

class ShapeMismatch(XLREError):
    pass


class EmptyCorpus(XLREError):
    pass


class EmptyText(XLREError):
    pass


# evaluation

class LengthMismatch(XLREError):
    pass


class EmptyList(XLREError):
    pass


class MissingDiagonal(XLREError):
    def __init__(self, language):
        self.language = language
        super().__init__(f"no supervised score f({language},{language})")


class DegenerateSupervised(XLREError):
    def __init__(self, language):
        self.language = language
        super().__init__(f"supervised score f({language},{language}) is zero")


class TooFewLanguages(XLREError):
    pass


# persistence / cli

class CheckpointError(XLREError):
    pass


class VocabularyMismatch(CheckpointError):
    pass


class UnknownCommand(XLREError):
    pass


class ConfigError(XLREError):
    def __init__(self, field, reason=""):
        self.field = field
        super().__init__(f"config error in {field!r}" + (f": {reason}" if reason else ""))
