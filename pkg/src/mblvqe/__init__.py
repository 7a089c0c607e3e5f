"""Statevector simulation of Floquet-initialized variational circuits.

Subpackages cover Pauli algebra (:mod:`mblvqe.paulis`), the dense state engine
(:mod:`mblvqe.state`), the layered ansatz (:mod:`mblvqe.circuits`), model
Hamiltonians (:mod:`mblvqe.hamiltonians`), trial states and encoders
(:mod:`mblvqe.trial`, :mod:`mblvqe.mps`), localization diagnostics
(:mod:`mblvqe.diagnostics`), gradients and optimizers (:mod:`mblvqe.optimize`),
and the config-driven batch runner (:mod:`mblvqe.experiments`, CLI ``mblvqe``).
"""

__version__ = "0.1.0"
