"""Clifford-circuit disentangling with a stabilizer simulator and PPO."""

from ._backend import COMPILED, available_backends
from .clifford import CliffordGate2Q, CliffordTable, enumerate_clifford_2q, sample_clifford_2q
from .env import CircuitSpec, DisentangleEnv, EnvConfig, build_brickwall, simulate
from .ppo import PolicyModel, TrainConfig, load_model, save_model, train
from .stabilizer import (
    PauliString, StabilizerTableau, apply_gate, avg_prefix_entropy, gf2_rank, measure_z,
    new_computational_basis_state, prefix_entropies, region_entropy,
)

__version__ = "0.1.0"
