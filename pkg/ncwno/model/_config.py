from dataclasses import dataclass, asdict

import numpy as np

from ncwno.wavelet import filter_bank

GATE_MODES = ('per-channel', 'broadcast')


@dataclass
class ModelConfig:
    """Hyperparameters of the operator.

    Parameters
    ----------
    rank : {1, 2}
        Spatial dimension of the grid.
    grid_shape : tuple of int
        Grid extents; fixed by the dense gate stack.
    in_channels : int
        Input channels ``d_a`` (the window length for time-marching tasks). Coordinate channels are added on top.
    out_channels : int
        Output channels ``d_u``.
    n_blocks : int
        Number of expert wavelet integral blocks ``h``.
    n_experts : int
        Local wavelet experts per block ``d_e``.
    width : int
        Lifted channel width ``d_v``.
    level : int
        Wavelet compression level ``s``.
    bases : tuple of str or None
        One Daubechies basis per expert; defaults to ``db1 ... db<n_experts>``.
    gate_mode : {'per-channel', 'broadcast'}
        Whether the gate emits one probability per expert and channel or one per expert.
    max_tasks : int
        Size of the one-hot task code and width of the label embedding.
    projection_width : int
        Hidden width of the projection ``Q``.
    gate_hidden : tuple of int or None
        Dense widths of the gate; defaults to (512, 256, 128, 64, 32) in 1-D and (128, 64) in 2-D.
    gate_conv_channels, gate_conv_kernel : int
        Channels and kernel size of the 2-D gate's convolutions.
    gate_conv_strides : tuple of int
        One stride per convolution of the 2-D gate.
    gate_pool : tuple of int
        Output extents of the average pooling behind the 2-D gate's convolutions.
    dtype : {'float32', 'float64'}
    """
    rank: int = 1
    grid_shape: tuple = (256,)
    in_channels: int = 10
    out_channels: int = 1
    n_blocks: int = 4
    n_experts: int = 10
    width: int = 64
    level: int = 4
    bases: tuple = None
    gate_mode: str = 'per-channel'
    max_tasks: int = 6
    projection_width: int = 128
    gate_hidden: tuple = None
    gate_conv_channels: int = 64
    gate_conv_kernel: int = 5
    gate_conv_strides: tuple = (2, 1, 1)
    gate_pool: tuple = (2, 2)
    dtype: str = 'float32'

    def __post_init__(self):
        self.grid_shape = tuple(int(n) for n in np.atleast_1d(self.grid_shape))
        if self.bases is None:
            self.bases = tuple('db%d' % (e + 1) for e in range(self.n_experts))
        self.bases = tuple(self.bases)
        if self.gate_hidden is None:
            self.gate_hidden = (512, 256, 128, 64, 32) if self.rank == 1 else (128, 64)
        self.gate_hidden = tuple(int(w) for w in self.gate_hidden)
        self.gate_conv_strides = tuple(int(k) for k in self.gate_conv_strides)
        self.gate_pool = tuple(int(k) for k in self.gate_pool)

        for name in ('n_blocks', 'n_experts', 'width', 'level', 'in_channels', 'out_channels', 'max_tasks',
                     'projection_width'):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ValueError('`%s` must be a positive integer, got %r.' % (name, value))
        if self.rank not in (1, 2):
            raise ValueError('`rank` must be 1 or 2, got %r.' % (self.rank,))
        if len(self.grid_shape) != self.rank:
            raise ValueError('`grid_shape` %s does not match rank %d.' % (self.grid_shape, self.rank))
        for n in self.grid_shape:
            if n < 2 ** self.level:
                raise ValueError('A grid of %d points is too small for %d wavelet levels.' % (n, self.level))
        if len(self.bases) != self.n_experts:
            raise ValueError('`bases` lists %d bases for %d experts.' % (len(self.bases), self.n_experts))
        if len(set(self.bases)) != len(self.bases):
            raise ValueError('Experts of a block must use distinct bases, got %s.' % (self.bases,))
        for name in self.bases:
            filter_bank(name)
        if self.gate_mode not in GATE_MODES:
            raise ValueError('`%s` is not implemented.' % self.gate_mode)
        if self.dtype not in ('float32', 'float64'):
            raise ValueError('`dtype` must be float32 or float64, got %r.' % (self.dtype,))
        if self.rank == 2 and len(self.gate_pool) != 2:
            raise ValueError('`gate_pool` must have two extents.')

    @property
    def lift_channels(self):
        return self.in_channels + self.rank

    @property
    def gate_head_width(self):
        return self.n_experts * self.width if self.gate_mode == 'per-channel' else self.n_experts

    def to_dict(self):
        document = asdict(self)
        for key, value in document.items():
            if isinstance(value, tuple):
                document[key] = list(value)
        return document

    @classmethod
    def from_dict(cls, document):
        return cls(**document)
