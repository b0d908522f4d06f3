from foldcast import _core  # noqa: F401
