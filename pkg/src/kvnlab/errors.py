"""Exception types shared by every kvnlab module."""


class KvnlabError(Exception):
    """Base class for kvnlab failures."""


class ParameterError(KvnlabError, ValueError):
    """An argument lies outside its allowed range."""


class DataError(KvnlabError, ValueError):
    """Input data (a field, density or grid) cannot support the requested computation."""
