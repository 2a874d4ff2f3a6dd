"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A run or component configuration is invalid."""


class DisconnectedConstellationError(RuntimeError):
    """The inter-plane connectivity graph does not connect all orbit planes."""

    def __init__(self, components: list[list[int]]):
        self.components = components
        parts = "; ".join("{" + ", ".join(str(v) for v in comp) + "}" for comp in components)
        super().__init__(f"inter-plane graph is disconnected: components {parts}")


class TopologyError(RuntimeError):
    """A routing-tree request cannot be satisfied on the given graph."""


class NumericalError(RuntimeError):
    """A numeric computation failed (NaN loss, eigen-solve failure, ...)."""
