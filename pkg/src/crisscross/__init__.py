"""Asymptotically optimal control of a criss-cross queueing network.

Modules:
  params    network parameters, regimes, static allocation LP, Brownian data
  skorohod  one-dimensional Skorohod map and reflection into the region G
  boundary  workload HJB solver and free-boundary extraction
  rbm       Monte Carlo for the reflected Brownian workload and BCP processes
  netsim    discrete-event simulation of the pre-limit network
  ldp       large-deviations rate functions and threshold parameter selection
  experiment  end-to-end pipeline orchestration
  cli       command-line entry point
"""

__version__ = "1.0.0"
