from .hmm import HMMModel, mshmm_score, train_mshmm
from .mc import MCModel, mc_score, train_mc
from .sm import SMModel, sm_score, train_sm

__all__ = [
    "HMMModel",
    "MCModel",
    "SMModel",
    "mc_score",
    "mshmm_score",
    "sm_score",
    "train_mc",
    "train_mshmm",
    "train_sm",
]
