"""Population models of chunked file swarms: the Markov chain of peer labels,
its deterministic fluid limit, equilibria, the chunk-splitting comparison,
and Gaussian fluctuations."""

from .labels import ChunkLabel, LabelError
from .model import ConfigError, JumpSet, ModelParams, build_jump_set, load_params
from .fluid import integrate, jacobian, vector_field
from .stochastic import SimConfig, simulate_agents, simulate_ssa, simulate_time_change

__all__ = [
    "ChunkLabel",
    "LabelError",
    "ConfigError",
    "JumpSet",
    "ModelParams",
    "build_jump_set",
    "load_params",
    "integrate",
    "jacobian",
    "vector_field",
    "SimConfig",
    "simulate_agents",
    "simulate_ssa",
    "simulate_time_change",
]
