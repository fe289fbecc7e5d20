"""
Synthetic and file-based labelled datasets.
"""
from .csv_parser import CsvDatasetParser, CsvSchema, load_csv, write_csv
from .models import SPLITS, LabeledDataset, concat_datasets
from .synthetic import make_blobs
