from dataclasses import dataclass

import numpy as np

from ncwno.model._config import ModelConfig
from ncwno.tensor import Tensor
from ncwno.wavelet import coeff_length, filter_bank

GATE_PREFIXES = ('gates.', 'encoder.')
N_ENCODER_LAYERS = 3


def kappa_bands(rank):
    return ('approx', 'detail') if rank == 1 else ('approx', 'horizontal', 'vertical', 'diagonal')


def _affine_shapes(shapes, prefix, fan_in, fan_out):
    shapes[prefix + '.weight'] = (fan_in, fan_out)
    shapes[prefix + '.bias'] = (fan_out,)


def parameter_shapes(config):
    """Ordered mapping from parameter name to shape.

    Names follow the layer structure: ``lift``, ``blocks.<j>.experts.<e>.kappa_<band>``, ``blocks.<j>.skip``,
    ``gates.<j>.conv.<k>`` (2-D only), ``gates.<j>.dense.<k>``, ``encoder.<k>`` and ``project.<k>``.
    """
    shapes = {}
    width = config.width
    _affine_shapes(shapes, 'lift', config.lift_channels, width)
    for j in range(config.n_blocks):
        for e, name in enumerate(config.bases):
            vanishing_moments = filter_bank(name).vanishing_moments
            support = tuple(coeff_length(n, config.level, vanishing_moments) for n in config.grid_shape)
            for band in kappa_bands(config.rank):
                shapes['blocks.%d.experts.%d.kappa_%s' % (j, e, band)] = support + (width, width)
        _affine_shapes(shapes, 'blocks.%d.skip' % j, width, width)
    for j in range(config.n_blocks):
        if config.rank == 1:
            features = config.grid_shape[0]
        else:
            channels_in = 1
            for k in range(len(config.gate_conv_strides)):
                kernel = config.gate_conv_kernel
                shapes['gates.%d.conv.%d.weight' % (j, k)] = (kernel, kernel, channels_in, config.gate_conv_channels)
                shapes['gates.%d.conv.%d.bias' % (j, k)] = (config.gate_conv_channels,)
                channels_in = config.gate_conv_channels
            features = channels_in * int(np.prod(config.gate_pool))
        widths = [features + config.max_tasks] + list(config.gate_hidden) + [config.gate_head_width]
        for k in range(len(widths) - 1):
            _affine_shapes(shapes, 'gates.%d.dense.%d' % (j, k), widths[k], widths[k + 1])
    for k in range(N_ENCODER_LAYERS):
        _affine_shapes(shapes, 'encoder.%d' % k, config.max_tasks, config.max_tasks)
    _affine_shapes(shapes, 'project.0', width, config.projection_width)
    _affine_shapes(shapes, 'project.1', config.projection_width, config.out_channels)
    return shapes


def is_gate_parameter(name):
    return name.startswith(GATE_PREFIXES)


def count_parameters(config, gate_only=False):
    """Number of scalar parameters, optionally restricted to the gates and the label encoder."""
    return sum(int(np.prod(shape)) for name, shape in parameter_shapes(config).items()
               if not gate_only or is_gate_parameter(name))


@dataclass
class ModelState:
    """Parameters of one operator together with its configuration and wavelet bases."""
    config: ModelConfig
    params: dict
    banks: tuple

    @property
    def gate_parameter_names(self):
        return [name for name in self.params if is_gate_parameter(name)]

    @property
    def foundation_parameter_names(self):
        return [name for name in self.params if not is_gate_parameter(name)]

    def snapshot(self, names=None):
        """Copies of the parameter values named in ``names`` (all by default)."""
        names = self.params if names is None else names
        return {name: self.params[name].data.copy() for name in names}

    def count(self, names=None):
        names = self.params if names is None else names
        return sum(self.params[name].size for name in names)


def _fan_in(name, shape):
    if '.conv.' in name:
        return shape[0] * shape[1] * shape[2]
    return shape[0]


def init_state(config, random_state=0):
    """Initialize an operator.

    Expert kernels are drawn from ``U(0, 1) / width**2``; affine and convolution weights and biases from
    ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``.

    Parameters
    ----------
    config : ModelConfig
    random_state : int or numpy.random.Generator, default 0

    Returns
    -------
    state : ModelState
    """
    rng = np.random.default_rng(random_state)
    dtype = np.dtype(config.dtype)
    params = {}
    fan_ins = {}
    for name, shape in parameter_shapes(config).items():
        if '.kappa_' in name:
            value = rng.random(shape) / config.width ** 2
        else:
            prefix = name.rsplit('.', 1)[0]
            if name.endswith('.weight'):
                fan_ins[prefix] = _fan_in(name, shape)
            bound = 1 / np.sqrt(fan_ins[prefix])
            value = rng.uniform(-bound, bound, shape)
        params[name] = Tensor(value.astype(dtype), requires_grad=True)
    banks = tuple(filter_bank(name) for name in config.bases)
    return ModelState(config=config, params=params, banks=banks)


def make_grid(shape, endpoint=False):
    """Normalized coordinates of a regular grid, shape ``(*shape, len(shape))``.

    Periodic grids (``endpoint=False``) cover ``[0, 1)``; node-centred grids include both ends of ``[0, 1]``.
    """
    axes = [np.linspace(0, 1, n, endpoint=endpoint) for n in np.atleast_1d(shape)]
    return np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1)
