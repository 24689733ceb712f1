"""Exception hierarchy shared by all deplima modules.

Every error raised on a documented failure path derives from DeplimaError so
callers (and the CLI) can separate data/model problems from plain bugs.
"""


class DeplimaError(Exception):
    """Base class for all documented deplima failures."""


# ---------------------------------------------------------------- pipeline

class ConfigError(DeplimaError):
    """Malformed pipeline configuration file."""


class UnknownUnit(DeplimaError):
    def __init__(self, name):
        super().__init__(f"no processing unit registered under {name!r}")
        self.name = name


class UnsatisfiedInput(DeplimaError):
    def __init__(self, step_index, layer):
        super().__init__(
            f"step {step_index}: input layer {layer!r} is neither primordial "
            f"nor produced by an earlier step"
        )
        self.step_index = step_index
        self.layer = layer


class MissingResource(DeplimaError):
    def __init__(self, language, name, detail=""):
        msg = f"resource {name!r} for language {language!r} unavailable"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.language = language
        self.name = name


class MissingParam(DeplimaError):
    def __init__(self, unit, key):
        super().__init__(f"unit {unit!r} requires parameter {key!r}")
        self.unit = unit
        self.key = key


class UnitFailure(DeplimaError):
    """A pipeline step failed; execution aborts, nothing is published."""

    def __init__(self, step_index, message):
        super().__init__(f"step {step_index} failed: {message}")
        self.step_index = step_index
        self.message = message


class MissingLayer(DeplimaError):
    def __init__(self, name):
        super().__init__(f"analysis data has no layer {name!r}")
        self.name = name


# ------------------------------------------------------------------- graph

class OverlappingOffsets(DeplimaError):
    pass


class UnknownNode(DeplimaError):
    pass


class EmptyAlternative(DeplimaError):
    pass


class CycleDetected(DeplimaError):
    pass


class TooManyPaths(DeplimaError):
    pass


class GraphInvariantError(DeplimaError):
    pass


# ------------------------------------------------------------------ conllu

class ConlluError(DeplimaError):
    pass


class BadColumnCount(ConlluError):
    def __init__(self, line_no, count):
        super().__init__(f"line {line_no}: expected 10 tab-separated fields, got {count}")
        self.line_no = line_no


class NonContiguousIds(ConlluError):
    def __init__(self, sentence_no):
        super().__init__(f"sentence {sentence_no}: token ids are not 1..n contiguous")
        self.sentence_no = sentence_no


class BadHead(ConlluError):
    def __init__(self, line_no, detail):
        super().__init__(f"line {line_no}: bad head ({detail})")
        self.line_no = line_no


class EmptyDocument(ConlluError):
    pass


class EmptyNodeId(ConlluError):
    def __init__(self, line_no, token_id):
        super().__init__(f"line {line_no}: empty nodes ({token_id!r}) are not supported")
        self.line_no = line_no


class InvariantViolation(ConlluError):
    pass


# ---------------------------------------------------------------- numerics

class DimMismatch(DeplimaError):
    pass


class NonFiniteValue(DeplimaError):
    pass


class MissingGradient(DeplimaError):
    pass


class BadContainer(DeplimaError):
    """Corrupt or mistyped model parameter container."""


# ---------------------------------------------------------------- training

class EmptyCorpus(DeplimaError):
    pass


class EmptyTrainingSet(DeplimaError):
    pass


class MissingRawText(DeplimaError):
    pass


class EmptySentence(DeplimaError):
    pass


class MissingGoldAnnotations(DeplimaError):
    pass


# -------------------------------------------------------------- embeddings

class BadSubquantizerCount(DeplimaError):
    pass


# --------------------------------------------------------------------- ner

class BadRuleReference(DeplimaError):
    pass


class RuleSyntaxError(DeplimaError):
    pass


class OverlappingSpans(DeplimaError):
    pass


class OutOfRange(DeplimaError):
    pass


# -------------------------------------------------------------------- eval

class SentenceCountMismatch(DeplimaError):
    pass


class TokenCountMismatch(DeplimaError):
    def __init__(self, sentence_no, gold_n, pred_n):
        super().__init__(
            f"sentence {sentence_no}: gold has {gold_n} tokens, prediction has {pred_n}"
        )
        self.sentence_no = sentence_no
