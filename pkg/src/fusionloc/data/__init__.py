from .io import (
    SET01_SPECS,
    Sample,
    Sequence,
    SequenceSpec,
    dataset_hash,
    default_sequence_specs,
    generate_dataset,
    load_dataset,
    load_sequence,
    load_world,
    read_norm,
    write_sequence,
)
from .transforms import color_jitter, preprocess_image, sample_scan
from .world import World, WorldConfig, generate_trajectory, generate_world, raycast_scan, render_view, room_world

__all__ = [
    "color_jitter",
    "dataset_hash",
    "default_sequence_specs",
    "generate_dataset",
    "generate_trajectory",
    "generate_world",
    "load_dataset",
    "load_sequence",
    "load_world",
    "preprocess_image",
    "raycast_scan",
    "read_norm",
    "render_view",
    "room_world",
    "Sample",
    "sample_scan",
    "Sequence",
    "SequenceSpec",
    "SET01_SPECS",
    "World",
    "WorldConfig",
    "write_sequence",
]
