"""Identity commitments with selective disclosure, anchored in a UTXO ledger.

Main entry points:

- :mod:`dlrep_anchor.group`: test and secp256k1 groups, generator derivation
- :mod:`dlrep_anchor.dlrep`: commitments and the interactive disclosure proofs
- :mod:`dlrep_anchor.lifecycle`: enrollment, hash-chain updates, revocation
- :mod:`dlrep_anchor.smt`: sparse Merkle registry and the cm chain
- :mod:`dlrep_anchor.ledger`: simulated ledger, anchoring chain, cost estimates
- :mod:`dlrep_anchor.actors`: user, issuer, service enabler and provider
- :mod:`dlrep_anchor.simulator`: seeded worlds and the scenario runner
"""

from .dlrep import LinearRelation, Statement, prove, verify
from .group import make_params
from .ledger import Ledger, follow_chain, verify_cm_history
from .simulator import ScenarioScript, Simulation, run_scenario
from .smt import SparseTree, verify_branch

__version__ = "0.1.0"

__all__ = [
    "Ledger",
    "LinearRelation",
    "ScenarioScript",
    "Simulation",
    "SparseTree",
    "Statement",
    "follow_chain",
    "make_params",
    "prove",
    "run_scenario",
    "verify",
    "verify_branch",
    "verify_cm_history",
]
