from .losses import (MeasuringFunction, discriminator_loss_empirical, discriminator_loss_terms,
                     generator_loss_empirical, measuring_apply)
from .models import Discriminator, Generator, NoisePrior, all_parameters
from .training import (ADAM_TABLE, CONVERGED, FAILED, Checkpoint, TrainConfig, TrainResult, adam_defaults,
                       build_models, train, train_step_discriminator, train_step_generator)

__all__ = ["ADAM_TABLE", "CONVERGED", "FAILED", "Checkpoint", "Discriminator", "Generator", "MeasuringFunction",
           "NoisePrior", "TrainConfig", "TrainResult", "adam_defaults", "all_parameters", "build_models",
           "discriminator_loss_empirical", "discriminator_loss_terms", "generator_loss_empirical",
           "measuring_apply", "train", "train_step_discriminator", "train_step_generator"]
