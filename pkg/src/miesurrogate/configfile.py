"""Shared CLI configuration file.

One INI-style document for all commands: a ``[command]`` section per
subcommand, keys spelled like the long option names without the leading
dashes. Command-line flags override config values, which override the
built-in defaults. Schema version 1.
"""

from __future__ import annotations

import configparser

from .errors import ParseError

CONFIG_SCHEMA_VERSION = 1


def load_config(path) -> dict:
    """Parse into {section: {key: raw string}}."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as f:
            parser.read_file(f)
    except configparser.Error as exc:
        raise ParseError(f"{path}: {exc}") from exc
    doc = {}
    for section in parser.sections():
        doc[section] = dict(parser.items(section))
    version = doc.get("meta", {}).get("schema-version")
    if version is not None and int(version) != CONFIG_SCHEMA_VERSION:
        raise ParseError(
            f"{path}: unsupported schema-version {version}")
    return doc


def section_for(config: dict, command: str) -> dict:
    """Options for a command: [common] section overlaid by [command]."""
    merged = dict(config.get("common", {}))
    merged.update(config.get(command, {}))
    return merged
