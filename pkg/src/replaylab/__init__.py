"""replaylab: prioritized-replay analysis and SGLD search-control lab.

Subpackages:
  net             dense-network engine (forward, exact grads, Adam)
  supervised      prioritized/uniform regression, cubic-equivalence checks
  flow            gradient-flow hitting-time analysis
  replay          uniform and sum-tree prioritized replay buffers
  envs            GridWorld and MountainCar with generative true models
  model           learned one-step dynamics model
  search_control  SGLD sampler, covariance/acceptance machinery, SC queue
  agents          DQN variants and Dyna loops
  analysis        grid distributions, distances, model-error bound checker
  harness         experiment configs, seeded runners, CSV logging, CLI
"""

__version__ = "0.1.0"
