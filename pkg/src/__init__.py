# Constant-stepsize SA Lab
# Nonsmooth contractive stochastic approximation and Q-learning experiments

__version__ = "1.0.0"
