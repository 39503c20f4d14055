"""Allow anomalens to be run as a module."""

from anomalens_cli.main import main

if __name__ == "__main__":
    main()
