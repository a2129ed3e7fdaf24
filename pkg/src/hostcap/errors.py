"""Exception types shared across the package."""


class ConfigError(Exception):
    """Invalid or inconsistent pipeline configuration (CLI exit code 1)."""


class StageError(Exception):
    """A pipeline stage failed (CLI exit code 2)."""

    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"stage '{stage}': {message}")


class NetworkValidationError(ValueError):
    """Feeder network violates structural requirements."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(problems))
