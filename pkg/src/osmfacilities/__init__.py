"""Extract schools and health clinics from OpenStreetMap PBF extracts.

The pipeline decodes PBF files, resolves structured OSM keys into a
four-class scheme (schools, clinics, other, unresolved), recovers
additional facilities from free-text tags with a gazetteer and a pluggable
four-label topic model, and aggregates the results into per-area coverage
statistics.
"""

__version__ = "0.1.0"
