"""Alias of :mod:`nlpoisson.fixtures` under the name used by the CLI help."""

from .fixtures import FIXTURE_IDS, Fixture, printed_source, fixture, transcription_report

__all__ = ["FIXTURE_IDS", "Fixture", "printed_source", "fixture", "transcription_report"]
