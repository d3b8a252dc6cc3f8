"""
langfield
---------
Feature uncertainty, the language autoencoder and the multi-appearance
language field.
"""

from .uncertainty import (UncertaintyMap, appearance_uncertainty, transient_uncertainty,
                          normalize_maps, occluder_mask, uncertainty_weight)
from .optim import Adam
from .autoencoder import (DivergenceError, MlpParams, AeTrainConfig, init_params, encode, decode,
                          encode_map, decode_map, ae_loss, training_set, train_ae,
                          save_params, load_params, save_loss_curve)
from .field import (FieldTargets, FieldTrainConfig, FieldGradients, LanguageField,
                    build_targets, field_loss, train_field)

__all__ = ["UncertaintyMap", "appearance_uncertainty", "transient_uncertainty", "normalize_maps",
           "occluder_mask", "uncertainty_weight",
           "Adam",
           "DivergenceError", "MlpParams", "AeTrainConfig", "init_params", "encode", "decode",
           "encode_map", "decode_map", "ae_loss", "training_set", "train_ae",
           "save_params", "load_params", "save_loss_curve",
           "FieldTargets", "FieldTrainConfig", "FieldGradients", "LanguageField",
           "build_targets", "field_loss", "train_field"]
