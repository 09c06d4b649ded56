from ._filters import FilterBank, daubechies_filters, filter_bank, coeff_length
from ._transform import WaveletCoeffs, dwt_multilevel, idwt_multilevel, analysis_level, synthesis_level

__all__ = ['FilterBank', 'daubechies_filters', 'filter_bank', 'coeff_length', 'WaveletCoeffs', 'dwt_multilevel',
           'idwt_multilevel', 'analysis_level', 'synthesis_level']
