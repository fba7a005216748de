import importlib
from functools import lru_cache
from typing import TypeVar


T = TypeVar("T")


def import_from(qual_name: str):
    """Import a value from its fully qualified name.

    For example, 'homognet.model.gauge.SparseL2Gauge' imports the SparseL2Gauge
    class from the homognet.model.gauge module.

    Args:
        qual_name: A fully qualified name in the format 'module.submodule.name'

    Returns:
        The imported value (class, function, or variable)
    """
    parts = qual_name.split(".")
    if len(parts) < 2:
        raise ImportError(f"Not a qualified name: {qual_name!r}")
    module_name = ".".join(parts[:-1])
    module = importlib.import_module(module_name)
    return getattr(module, parts[-1])


@lru_cache()
def _get_impl(cls: type[T], impl_name: str | None) -> type[T]:
    if impl_name is None:
        return cls
    impl_class = import_from(impl_name)
    if not (impl_class is cls or issubclass(impl_class, cls)):
        raise TypeError(f"{impl_name} is not a subclass of {cls.__qualname__}")
    return impl_class


def get_impl(cls: type[T], impl_name: str | None) -> type[T]:
    """Import and validate a named implementation of a base class.

    Lets a configuration substitute a family service or a structured-sensing
    gauge by qualified class name. The imported class must be the base class
    itself or one of its subclasses. Lookups are cached.

    Example:
        >>> Gauge = get_impl(Gauge, "mypkg.gauges.GroupGauge")
    """
    return _get_impl(cls, impl_name)  # type: ignore
