from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .heads import (BetaHead, GaussianHead, beta_entropy, beta_head, beta_log_prob, beta_sample,
                    gaussian_entropy, gaussian_head, gaussian_log_prob, make_head)
from .mlp import MLP, mlp_backward, mlp_forward
from .optim import Adam, clip_grad_norm
from .special import digamma, lgamma, log_beta_fn, sample_beta, sample_gamma, trigamma

__all__ = [
    "MLP", "mlp_forward", "mlp_backward", "Adam", "clip_grad_norm",
    "BetaHead", "GaussianHead", "make_head", "beta_head", "beta_sample", "beta_log_prob", "beta_entropy",
    "gaussian_head", "gaussian_log_prob", "gaussian_entropy",
    "lgamma", "digamma", "trigamma", "log_beta_fn", "sample_gamma", "sample_beta",
    "save_checkpoint", "load_checkpoint", "CheckpointError",
]
