"""Dataset parsing, dev partitioning and run files."""

from .corpora import (
    DATASET_BREAKDOWN,
    DatasetSplit,
    DevPartition,
    Entry,
    SplitName,
    format_acos_line,
    format_aste_line,
    load_split,
    parse_acos_line,
    parse_aste_line,
    partition_dev,
)
from .runs import RunManifest, read_run, write_run

__all__ = [
    "DATASET_BREAKDOWN",
    "DatasetSplit",
    "DevPartition",
    "Entry",
    "RunManifest",
    "SplitName",
    "format_acos_line",
    "format_aste_line",
    "load_split",
    "parse_acos_line",
    "parse_aste_line",
    "partition_dev",
    "read_run",
    "write_run",
]
