from ncwno import (
    tensor,
    wavelet,
    model,
    continual,
    pde,
    exceptions,
)

__version__ = '0.1.0'

__all__ = [
    'tensor',
    'wavelet',
    'model',
    'continual',
    'pde',
    'exceptions',
]
