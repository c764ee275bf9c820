"""Gray-box building thermal modelling: RC physics, hybrid learners, Owen attributions.

Subpackages and modules
-----------------------
timeseries   frames, schemas, CSV I/O, resampling, standardization
synthetic    seeded synthetic building world with a hidden ground-truth model
physics      RC network simulation, calibration and fidelity tiers
learners     linear regression, feedforward network and random forest
hybrid       assistant, residual, surrogate and augmentation strategies
explain      feature clustering, Owen values, native importances, plot exports
evalharness  metrics, experiment drivers and the ``hybridtherm`` command
"""

__version__ = "0.1.0"

from .hybrid import (  # noqa: E402
    HybridModel,
    HybridStrategy,
    LearnerConfig,
    data_only_fit,
    hybrid_fit,
    hybrid_predict,
    load_bundle,
    physics_only_predict,
    save_bundle,
)
from .physics import PhysicsTier, make_tier  # noqa: E402
from .synthetic import WorldConfig, generate_dataset  # noqa: E402
from .timeseries import SCENARIOS, TierKind, TimeSeriesFrame  # noqa: E402

__all__ = [
    "SCENARIOS",
    "HybridModel",
    "HybridStrategy",
    "LearnerConfig",
    "PhysicsTier",
    "TierKind",
    "TimeSeriesFrame",
    "WorldConfig",
    "data_only_fit",
    "generate_dataset",
    "hybrid_fit",
    "hybrid_predict",
    "load_bundle",
    "make_tier",
    "physics_only_predict",
    "save_bundle",
    "__version__",
]
