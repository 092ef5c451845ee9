#!/usr/bin/env python
"""Entry point: `python manage.py experiment <subcommand> [--config PATH] [--seed N] ...`"""
import os
import sys


def main():
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "core.settings")
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError("Couldn't import Django. Install requirements.txt into the active environment.") from exc
    execute_from_command_line(sys.argv)


if __name__ == "__main__":
    main()
