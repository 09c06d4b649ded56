import numpy as np

from ncwno.tensor._tensor import Tensor

_VISITING, _DONE = 1, 2


class Graph:
    """Operation records reachable from an output, in topological order (inputs first).

    Parameters
    ----------
    nodes : list of Tensor
        Topologically ordered tensors.
    """

    def __init__(self, nodes):
        self.nodes = list(nodes)

    @property
    def leaves(self):
        return [node for node in self.nodes if node.is_leaf and node.requires_grad]

    @classmethod
    def from_output(cls, output):
        """Trace the graph behind ``output`` with an iterative depth-first search.

        Raises
        ------
        ValueError
            If the recorded parents form a cycle.
        """
        order = []
        state = {}
        stack = [(output, False)]
        while stack:
            node, expanded = stack.pop()
            key = id(node)
            if expanded:
                state[key] = _DONE
                order.append(node)
                continue
            if state.get(key) == _DONE:
                continue
            if state.get(key) == _VISITING:
                raise ValueError('The computation graph contains a cycle.')
            state[key] = _VISITING
            stack.append((node, True))
            for parent in node._parents:
                status = state.get(id(parent))
                if status == _VISITING:
                    raise ValueError('The computation graph contains a cycle.')
                if status is None:
                    stack.append((parent, False))
        return cls(order)


def backward(loss, graph=None):
    """Accumulate the gradient of a scalar ``loss`` into every leaf that requires it.

    Gradients reaching a leaf along several paths are summed, and are added to whatever the leaf already holds.

    Parameters
    ----------
    loss : Tensor
        Scalar tensor.
    graph : Graph or None
        Precomputed graph of ``loss``. If None, it is traced.

    Returns
    -------
    leaves : list of Tensor
        Leaves that received a gradient.
    """
    if not isinstance(loss, Tensor):
        raise TypeError('`loss` must be a Tensor.')
    if loss.size != 1:
        raise ValueError('`loss` must be a scalar, got shape %s.' % (loss.shape,))
    if graph is None:
        graph = Graph.from_output(loss)

    grads = {id(loss): np.ones_like(loss.data)}
    touched = []
    for node in reversed(graph.nodes):
        g = grads.pop(id(node), None)
        if g is None or not node.requires_grad:
            continue
        if node.is_leaf:
            g = np.asarray(g, dtype=node.dtype).reshape(node.shape)
            node.grad = g.copy() if node.grad is None else node.grad + g
            touched.append(node)
            continue
        for parent, parent_grad in zip(node._parents, node._backward(g)):
            if parent_grad is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = grads[key] + parent_grad if key in grads else parent_grad
    return touched
