from .datasets import (Dataset, GaussianRingConfig, PatternConfig, fixed_partition, read_manifest,
                       split_train_holdout, synth_gaussian_ring, synth_patterns, write_manifest)
from .images import load_image_folder, read_pnm, save_grid, write_pnm
from .metrics import ChannelStats, Gap, ScoreClassifier, channel_stddev, classifier_score, gap_from_losses

__all__ = ["ChannelStats", "Dataset", "Gap", "GaussianRingConfig", "PatternConfig", "ScoreClassifier",
           "channel_stddev", "classifier_score", "fixed_partition", "gap_from_losses", "load_image_folder",
           "read_manifest", "read_pnm", "save_grid", "split_train_holdout", "synth_gaussian_ring", "synth_patterns",
           "write_manifest", "write_pnm"]
