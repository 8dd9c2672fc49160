"""Coupling between modal states and the nodal fields the nonlinearities see.

A :class:`NodalLayout` is a pair of linear maps per field:

* ``inputs[f]`` (nodes x dim) turns a state into the nodal values of field ``f``;
* ``outputs[f]`` (dim x nodes) turns a nodal source on field ``f`` into a state
  contribution.

Diffusion fields use an eigenfunction matrix and its projection; the damped
wave reads the displacement from the energy coordinates and writes into the
velocity block; scalar problems use the identity.
"""
from collections import defaultdict

import numpy as np

from .errors import ContractError
from .nonlinearity import evaluate


class NodalLayout:
    def __init__(self, inputs, outputs, state_blocks=None, nodes=None):
        inputs = np.asarray(inputs, dtype=float)
        outputs = np.asarray(outputs, dtype=float)
        if inputs.ndim != 3 or outputs.ndim != 3:
            raise ContractError("layout maps must be stacked per field")
        n_fields, n_nodes, dim = inputs.shape
        if outputs.shape != (n_fields, dim, n_nodes):
            raise ContractError(f"output maps have shape {outputs.shape}, expected "
                                f"{(n_fields, dim, n_nodes)}")
        self.inputs = inputs
        self.outputs = outputs
        self.state_blocks = state_blocks or [slice(0, dim)]
        self.nodes = nodes

    @property
    def n_fields(self):
        return self.inputs.shape[0]

    @property
    def n_nodes(self):
        return self.inputs.shape[1]

    @property
    def dim(self):
        return self.inputs.shape[2]

    @classmethod
    def identity(cls, dim):
        eye = np.eye(dim)
        return cls(eye[None], eye[None])

    def field(self, state, f):
        return self.inputs[f] @ state

    def fields(self, state):
        return self.inputs @ state

    def assemble(self, sources):
        """Sum ``outputs[f] @ sources[f]`` over the fields present in ``sources``."""
        out = np.zeros(self.dim)
        for f, src in sources.items():
            out += self.outputs[f] @ src
        return out

    def field_norms(self, state):
        return [float(np.linalg.norm(state[b])) for b in self.state_blocks]


class DelayProblem:
    """Linear generator, delay terms and the layout connecting them."""

    def __init__(self, op, terms, layout=None):
        layout = NodalLayout.identity(op.dim) if layout is None else layout
        if layout.dim != op.dim:
            raise ContractError(f"layout dimension {layout.dim} differs from operator {op.dim}")
        for term in terms:
            for f in (term.target_field, term.current_field, term.delayed_field):
                if not 0 <= f < layout.n_fields:
                    raise ContractError(f"term routes to field {f}, layout has {layout.n_fields}")
            for name, c in term.coeffs.items():
                if np.ndim(c) and np.shape(c) != (layout.n_nodes,):
                    raise ContractError(f"nodal coefficient {name} does not match the grid")
        self.op = op
        self.terms = list(terms)
        self.layout = layout

    @property
    def delays(self):
        return [t.delay for t in self.terms]

    @property
    def tau_min(self):
        return min(self.delays) if self.terms else np.inf

    @property
    def tau_max(self):
        return max(self.delays) if self.terms else 0.0

    def nonlinear(self, state, delayed):
        """``sum_i F_i(U, U(t - tau_i))`` as a state vector.

        ``delayed[i]`` is the state at ``t - tau_i`` for term ``i``.
        """
        if not self.terms:
            return np.zeros(self.op.dim)
        lay = self.layout
        now = lay.fields(state)
        sources = defaultdict(lambda: np.zeros(lay.n_nodes))
        for term, past in zip(self.terms, delayed):
            y = lay.field(past, term.delayed_field)
            sources[term.target_field] = sources[term.target_field] + evaluate(
                term, now[term.current_field], y)
        return lay.assemble(sources)

    def rhs(self, state, delayed):
        return self.op.generator(state) + self.nonlinear(state, delayed)
