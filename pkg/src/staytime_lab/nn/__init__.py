from staytime_lab.nn.params import Param, ParamSet
from staytime_lab.nn.layers import Dense, MLP, relu, xavier_uniform
from staytime_lab.nn.attention import MultiHeadSelfAttention
from staytime_lab.nn.embedding import EmbeddingLayer
from staytime_lab.nn.optim import Adam, SGD
from staytime_lab.nn.gradcheck import GradCheckResult, grad_check
from staytime_lab.nn.checkpoint import load_sections, save_sections

__all__ = [
    "Adam",
    "Dense",
    "EmbeddingLayer",
    "GradCheckResult",
    "MLP",
    "MultiHeadSelfAttention",
    "Param",
    "ParamSet",
    "SGD",
    "grad_check",
    "load_sections",
    "relu",
    "save_sections",
    "xavier_uniform",
]
