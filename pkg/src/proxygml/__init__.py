"""Proxy-based deep graph metric learning (ProxyGML) on precomputed features."""
from .config import RunConfig, build_config, load_config, parse_config
from .errors import (DegenerateInputError, DivergenceError, IntegrityError, ParameterError,
                     ParseError, ProxyGMLError, ShapeError, UsageError)
from .evaluation import EvalReport, evaluate_embeddings, kmeans, nmi, recall_at_n
from .rlp_loss import LossBundle, LossOptions, backward, forward, loss_and_grads
from .trainer import ablate, train

__version__ = "0.1.0"
