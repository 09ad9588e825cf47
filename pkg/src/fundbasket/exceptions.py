class FundbasketError(Exception):
    """Base class for all package errors."""


class ConfigError(FundbasketError, ValueError):
    pass


class DataError(FundbasketError, ValueError):
    pass


class ModelError(FundbasketError, RuntimeError):
    pass


class ParseError(DataError):
    def __init__(self, accession_id: str, message: str):
        super().__init__(f"{accession_id}: {message}")
        self.accession_id = accession_id


class CacheCorruptionError(DataError):
    pass
