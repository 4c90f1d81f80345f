"""cvqkdsim: end-to-end simulator and analysis toolkit for pilot-assisted
local-local-oscillator Gaussian-modulated coherent-state CV-QKD."""

__version__ = "0.1.0"
