"""statecraft: deterministic simulation and decision support for multilevel
state-transition scenarios."""

__version__ = "0.1.0"

ENGINE_VERSION = f"statecraft/{__version__}"
