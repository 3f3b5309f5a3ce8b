#!/usr/bin/env python
"""Entry point for the trackcull commands: simulate, extract, train, evaluate, benchmark, study, replay."""

import os
import sys

from django.core.management import execute_from_command_line


def main():
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "project.settings")
    execute_from_command_line(sys.argv)


if __name__ == "__main__":
    main()
