"""Spiking network simulator with synaptic fault injection and
astrocyte-inspired self-repair.

Subpackage map:
  data        dataset parsing, edge filtering, rate encoding
  neurons     leaky integrate-and-fire layer with homeostatic thresholds
  plasticity  trace STDP, weight-scaled potentiation, normalization
  astro       tripartite-synapse micro-model (calcium, DSE, e-SP, PR)
  network     layer container wiring neurons + plasticity per sample
  experiment  training, fault injection, repair, and evaluation protocol
  checkpoint  binary network snapshots
  config      run configuration and flat-file parsing
  cli         command-line interface
"""

__version__ = "0.1.0"
