from ._tensor import Tensor, as_tensor, operation, unbroadcast, no_grad, is_grad_enabled
from ._tensor import add, sub, mul, div, neg, tensor_sum, mean, reshape, transpose, getitem
from ._ops import concatenate, stack, pad, broadcast_to, sqrt, exp, einsum, pointwise_channel_mix, conv2d
from ._ops import adaptive_avg_pool2d, zeros_like
from ._activations import mish, softmax_over_axis
from ._graph import Graph, backward
from ._optim import AdamState, Adam, adam_step, clip_grad_norm, step_lr_schedule
from ._gradcheck import check_gradients
from ._io import save_tensors, load_tensors

__all__ = [
    'Tensor', 'as_tensor', 'operation', 'unbroadcast', 'no_grad', 'is_grad_enabled',
    'add', 'sub', 'mul', 'div', 'neg', 'tensor_sum', 'mean', 'reshape', 'transpose', 'getitem',
    'concatenate', 'stack', 'pad', 'broadcast_to', 'sqrt', 'exp', 'einsum', 'pointwise_channel_mix', 'conv2d',
    'adaptive_avg_pool2d', 'zeros_like', 'mish', 'softmax_over_axis', 'Graph', 'backward', 'AdamState', 'Adam',
    'adam_step', 'clip_grad_norm', 'step_lr_schedule', 'check_gradients', 'save_tensors', 'load_tensors',
]
