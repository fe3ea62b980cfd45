"""Deep latent force models.

Deep probabilistic regression built by stacking weight-space Gaussian
process approximations whose basis functions are random Fourier response
features of a first-order differential equation, trained end to end with
reparameterized stochastic variational inference.
"""

__version__ = "0.1.0"

from .autodiff import Tensor, no_grad
from .data import Normalization, SeriesDataset, load_dataset
from .dynamics import (
    GeneratedSeries,
    generate_fitzhugh_nagumo,
    generate_lorenz,
    generate_toy,
    rk4_integrate,
)
from .features import (
    EQFeatureSpec,
    RFRFSpec,
    SpectralFrequencies,
    eq_feature_vector,
    rfrf_complex,
    rfrf_feature_vector,
    sample_eq_frequencies,
    sample_rfrf_frequencies,
)
from .metrics import MetricReport, evaluate_predictions, mnll, nmse
from .model import DLFMNetwork, LayerSpec, NetworkConfig
from .training import TrainConfig, TrainResult, elbo_estimate, train

__all__ = [
    "Tensor",
    "no_grad",
    "Normalization",
    "SeriesDataset",
    "load_dataset",
    "GeneratedSeries",
    "generate_fitzhugh_nagumo",
    "generate_lorenz",
    "generate_toy",
    "rk4_integrate",
    "EQFeatureSpec",
    "RFRFSpec",
    "SpectralFrequencies",
    "eq_feature_vector",
    "rfrf_complex",
    "rfrf_feature_vector",
    "sample_eq_frequencies",
    "sample_rfrf_frequencies",
    "MetricReport",
    "evaluate_predictions",
    "mnll",
    "nmse",
    "DLFMNetwork",
    "LayerSpec",
    "NetworkConfig",
    "TrainConfig",
    "TrainResult",
    "elbo_estimate",
    "train",
    "__version__",
]
