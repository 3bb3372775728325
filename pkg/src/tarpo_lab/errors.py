"""Exception hierarchy for tarpo_lab."""


class TarpoLabError(Exception):
    """Base class for every error raised by this package."""


class MalformedTable(TarpoLabError):
    pass


class UnknownColumn(TarpoLabError):
    def __init__(self, name):
        super().__init__(f"unknown column: {name!r}")
        self.name = name


class RowIndexOutOfRange(TarpoLabError):
    def __init__(self, index, n_rows):
        super().__init__(f"row index {index} out of range for table with {n_rows} rows")
        self.index = index
        self.n_rows = n_rows


class RegionSyntaxError(TarpoLabError):
    pass


class GroupTooSmall(TarpoLabError):
    pass


class DivergenceDetected(TarpoLabError):
    def __init__(self, step, what):
        super().__init__(f"non-finite {what} at step {step}")
        self.step = step
        self.what = what


class ConfigError(TarpoLabError):
    pass


class SchemaError(TarpoLabError):
    def __init__(self, path, line, reason):
        super().__init__(f"{path}:{line}: {reason}")
        self.path = str(path)
        self.line = line
        self.reason = reason


class MissingRecord(TarpoLabError):
    def __init__(self, record_id):
        super().__init__(f"transcript references unknown dataset id {record_id!r}")
        self.record_id = record_id


class IncompatibleRuns(TarpoLabError):
    pass
