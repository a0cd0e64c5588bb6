"""Inverse ODE parameter estimation with vanilla PINNs and domain-decomposed FBPINNs."""
from .datagen import Dataset, Trajectory, integrate_rk4, read_dataset, sample_dataset, write_dataset
from .fbpinn import Decomposition, build_decomposition, normalized_windows, train_fbpinn
from .models import CompetitionParams, SaturatedGrowthParams, make_model
from .netcore import Mlp, ParamVector, init_mlp
from .pinn import LossWeights, TrainingConfig, TrainReport, train_pinn

__version__ = "0.1.0"
