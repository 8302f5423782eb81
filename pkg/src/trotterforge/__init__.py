"""trotterforge: compile Trotter-Suzuki policies to circuits and learn good ones."""

__version__ = "0.1.0"
