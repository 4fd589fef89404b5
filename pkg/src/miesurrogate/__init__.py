"""Scattering correction for infrared spectra, a fast learned surrogate,
and the validation toolkit around both."""

__version__ = "0.1.0"

from .core import (LabeledDataset, SpectralCube, Spectrum, WavenumberGrid,
                   default_grid, resample, second_derivative,
                   vector_normalize)
from .oracle import (CorrectionResult, CubeCorrectionResult, EmscBasis,
                     EmscCoefficients, MieCurveConfig, RmiesConfig,
                     build_basis, build_extinction_database, correct_cube,
                     emsc_correct_once, emsc_fit, kramers_kronig,
                     pca_components, rmies_correct, vdh_extinction)
from .synth import (BandSpec, ClassTemplate, DistortionParams,
                    DistortionSampler, default_templates, distort,
                    generate_dataset, generate_pure)
from .network import (LayerParams, ModelParameters, NetworkConfig,
                      backprop_gradients, cae_pretrain_layer,
                      default_network_config, finetune_regression, forward,
                      forward_matrix, load_model, save_model, stack_pretrain)
from .uncertainty import (UncertaintyResult, mc_dropout_predict,
                          uncertainty_error_alignment)
from .evaluate import (AgreementReport, CentroidClassifier, RmseReport,
                       band_shift, classify, downstream_agreement,
                       rmse_dataset, train_downstream)
from .bench import BenchReport, compare, format_table, run_bench

__all__ = [name for name in dir() if not name.startswith("_")]
