"""Exception hierarchy shared by every module."""


class EnvBenchError(Exception):
    """Base class for domain errors (mapped to exit code 1 by the CLI)."""


class SchemaError(EnvBenchError, ValueError):
    """A table or prediction file violates its column/value contract.

    ``problems`` holds one human-readable message per offending row.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        shown = "; ".join(self.problems[:20])
        more = len(self.problems) - 20
        if more > 0:
            shown += f"; ... ({more} more)"
        super().__init__(shown)


class GeometryError(EnvBenchError, ValueError):
    pass


class SplitError(EnvBenchError, ValueError):
    pass


class EvaluationError(EnvBenchError, ValueError):
    pass
