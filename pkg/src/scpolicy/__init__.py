"""Firm-level supply network simulator for geopolitical rewiring policies.

Country+1, Friendshoring and Reshoring are applied to a directed
supplier -> customer network and the structural consequences (density,
assortativity, modularity, non-substitutable products, ...) are measured
before and after.
"""

from scpolicy.errors import ScPolicyError
from scpolicy.network import Firm, Product, SupplyEdge, SupplyNetwork, build_network

__version__ = "0.1.0"

__all__ = [
    "Firm",
    "Product",
    "ScPolicyError",
    "SupplyEdge",
    "SupplyNetwork",
    "build_network",
]
