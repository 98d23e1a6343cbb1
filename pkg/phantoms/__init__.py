from .generator import (
    PhantomRanges,
    PhantomSpec,
    UltrasoundSequence,
    diameter_trace,
    generate,
    lumen_width_profile,
    pulse,
    sample_spec,
)
from .augmentation import augment_flip, random_flip
from .sequence_io import (
    SequenceHeader,
    export_ground_truth_csv,
    iter_frames,
    read_header,
    read_sequence,
    write_sequence,
)
from .dataset import DatasetSplit, load_sequences, read_manifest, split, write_manifest

__all__ = [
    'PhantomRanges',
    'PhantomSpec',
    'UltrasoundSequence',
    'diameter_trace',
    'generate',
    'lumen_width_profile',
    'pulse',
    'sample_spec',
    'augment_flip',
    'random_flip',
    'SequenceHeader',
    'export_ground_truth_csv',
    'iter_frames',
    'read_header',
    'read_sequence',
    'write_sequence',
    'DatasetSplit',
    'load_sequences',
    'read_manifest',
    'split',
    'write_manifest',
]
