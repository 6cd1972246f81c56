class HiggsExplorerError(Exception):
    """Base class for every error raised by higgs_explorer."""


class ConfigError(HiggsExplorerError):
    pass


class DomainError(HiggsExplorerError):
    """A precondition of a numerical operation is violated."""


class GramError(HiggsExplorerError):
    """A Gram matrix came out indefinite, usually a sign of under-quadrature."""


class BaseLocusError(HiggsExplorerError):
    def __init__(self, node: int, message: str = "") -> None:
        self.node = node
        super().__init__(message or f"Evaluation matrix is singular at node {node}")


class UnderResolvedError(HiggsExplorerError):
    pass
