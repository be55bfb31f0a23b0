"""Decoupled-SPDZ simulator: triple generation, blind dispensation, and
fixed-point share arithmetic, applied to genomic case/control matching."""

from .errors import MpcError
from .modmath import (
    DEFAULT_GROUP_256,
    STANDARD_GROUP_2048,
    TINY_GROUP,
    Ciphertext,
    GroupParams,
    KeyPair,
    gen_group,
)
from .net import Message, PartyId, Runtime

__version__ = "0.1.0"

__all__ = [
    "MpcError",
    "GroupParams",
    "KeyPair",
    "Ciphertext",
    "gen_group",
    "TINY_GROUP",
    "DEFAULT_GROUP_256",
    "STANDARD_GROUP_2048",
    "PartyId",
    "Message",
    "Runtime",
    "__version__",
]
