from __future__ import annotations

from collections.abc import Iterable
from typing import Any


__all__ = ["lazy_import"]


def import_name(name: str, source: str, namespace: dict[str, Any]) -> Any:
    """
    Import ``name`` from ``source`` in ``namespace``.

    ``name`` may be an object defined in ``source`` or a submodule of
    ``source``. :func:`__import__` handles both cases with a ``fromlist``.

    """
    level = 0
    while source[level] == ".":
        level += 1
        assert level < len(source), "importing from parent isn't supported"
    module = __import__(source[level:], namespace, None, [name], level)
    return getattr(module, name)


def lazy_import(namespace: dict[str, Any], aliases: dict[str, str]) -> None:
    """
    Provide lazy, module-level imports.

    Typical use::

        lazy_import(
            globals(),
            aliases={
                "<name>": "<source module>",
                ...
            },
        )

    This function defines ``__getattr__`` and ``__dir__`` per :pep:`562`.
    Importing :mod:`driftlab` stays cheap: SciPy is only loaded when a name
    that needs it is first accessed.

    """
    namespace_set = set(namespace)
    aliases_set = set(aliases)

    assert not namespace_set & aliases_set, "namespace conflict"

    package = namespace["__name__"]

    def __getattr__(name: str) -> Any:
        try:
            source = aliases[name]
        except KeyError:
            raise AttributeError(
                f"module {package!r} has no attribute {name!r}"
            ) from None
        return import_name(name, source, namespace)

    namespace["__getattr__"] = __getattr__

    def __dir__() -> Iterable[str]:
        return sorted(namespace_set | aliases_set)

    namespace["__dir__"] = __dir__
