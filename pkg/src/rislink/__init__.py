"""Link-level simulator for a 220 GHz voltage-controlled reflective surface.

Submodules
----------
ris        element response model, grating initialization, voltage patterns
channel    array factor, link budget, received power, baseband channel
spgd       perturbation-feedback optimizer and power-feedback weights
coding     rate-1/2 convolutional code and Viterbi decoder
modem      QPSK/16QAM mapping and Zadoff-Chu sequences
frame      resource grid, per-user allocation, effective rate
ofdm       OFDM modulation, synchronization, estimation, equalization
scenarios  sweep / multi-group / image-transmission experiments
config     run configuration file format
cli        command line entry point
"""

__version__ = "0.1.0"

CONFIG_SCHEMA_VERSION = 1
