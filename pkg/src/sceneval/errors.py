"""Base class for all toolkit errors.

Every module defines its own exception types next to the code that raises
them; they all derive from ScenevalError so callers (notably the CLI) can
distinguish data problems from genuine bugs.
"""


class ScenevalError(Exception):
    pass
