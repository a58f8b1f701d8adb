"""2D driving simulator and training lab: imitation learning, DDPG, and
demonstration-bootstrapped DDPG on a small closed-loop track."""

__version__ = "0.1.0"
