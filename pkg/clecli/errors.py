class CLEError(Exception):
    pass


class ParseError(CLEError):

    def __init__(self, path, lineno, msg):
        super(ParseError, self).__init__(
            '{}:{}: {}'.format(path, lineno, msg))
        self.path = path
        self.lineno = lineno


class EmbeddingError(CLEError):
    pass


class LexiconError(CLEError):
    pass


class NumericalError(CLEError):
    pass


class AlignmentError(CLEError):
    pass


class EvaluationError(CLEError):
    pass


class ConfigError(CLEError):
    pass
