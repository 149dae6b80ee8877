"""Ingest, linkage, encoding, banding, splitting and batching of property records."""

from .bands import BANDS, PARTITIONS, BandTable, map_score_to_band
from .records import (CATEGORICAL_FIELDS, FLAG_FIELDS, NUMERIC_FIELDS, TABULAR_FEATURES, TARGETS, TEXT_FIELDS,
                      PropertyRecord, PropertyTable)
from .scaler import TargetScaler, build_target_scaler
from .features import FeatureBatch, Preprocessor
from .ingest import IngestReport, ingest, link_records, load_embedding_table
from .split import Split, StratumLabel, joint_stratified_split
from .sampler import BalancedBatches, balanced_batches, joint_partition_labels
