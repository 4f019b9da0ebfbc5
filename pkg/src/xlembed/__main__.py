"""Allow running the CLI as ``python -m xlembed``."""

from .cli import main

if __name__ == "__main__":
    main()
