from ._cardioforge import (
    __version__,
    default_config,
    metrics,
    preprocess,
    read_wav,
    roc,
    run_all,
    run_command,
    write_fixtures,
    write_wav,
)

__all__ = [
    "__version__",
    "default_config",
    "metrics",
    "preprocess",
    "read_wav",
    "roc",
    "run_all",
    "run_command",
    "write_fixtures",
    "write_wav",
]
