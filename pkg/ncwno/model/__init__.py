from ._config import ModelConfig
from ._state import (ModelState, init_state, parameter_shapes, count_parameters, is_gate_parameter, make_grid,
                     kappa_bands)
from ._network import (encode_label, gate_probabilities, local_wavelet_expert, expert_kernels, expert_block_forward,
                       ncwno_forward, predict)

__all__ = ['ModelConfig', 'ModelState', 'init_state', 'parameter_shapes', 'count_parameters', 'is_gate_parameter',
           'make_grid', 'kappa_bands', 'encode_label', 'gate_probabilities', 'local_wavelet_expert', 'expert_kernels',
           'expert_block_forward', 'ncwno_forward', 'predict']
