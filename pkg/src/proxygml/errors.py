class ProxyGMLError(Exception):
    pass


class ShapeError(ProxyGMLError, ValueError):
    pass


class ParameterError(ProxyGMLError, ValueError):
    pass


class DegenerateInputError(ProxyGMLError, ValueError):
    """Zero-norm feature row, or a prediction row with every class masked out."""


class UsageError(ProxyGMLError, RuntimeError):
    pass


class ParseError(ProxyGMLError, ValueError):
    pass


class IntegrityError(ProxyGMLError, ValueError):
    """Checkpoint failed its magic, version or CRC check."""


class DivergenceError(ProxyGMLError, FloatingPointError):
    pass
