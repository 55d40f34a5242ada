"""Online-learned deterministic one-step model: predicts (s' - s) and reward
from a state and a one-hot action, trained on mean squared error."""

from __future__ import annotations

import numpy as np

from .net import Adam, init_network


class LearnedModel:
    """Dense net over [state | one-hot action] -> [delta state | reward].

    Predictions clip the next state into the environment box.
    """

    def __init__(self, state_dim: int, num_actions: int, bounds,
                 hidden=(64, 64), learn_rate: float = 1e-4,
                 train_batch_size: int = 128,
                 seed: int | np.random.Generator = 0):
        self.state_dim = state_dim
        self.num_actions = num_actions
        self.lower, self.upper = (np.asarray(b, dtype=np.float64) for b in bounds)
        sizes = [state_dim + num_actions, *hidden, state_dim + 1]
        self.network = init_network(sizes, "relu", seed)
        self.optimizer = Adam(learning_rate=learn_rate)
        self.train_batch_size = train_batch_size

    def _encode(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(states)
        onehot = np.zeros((len(states), self.num_actions))
        onehot[np.arange(len(states)), actions] = 1.0
        return np.concatenate([states, onehot], axis=1)

    def model_train_step(self, states, actions, next_states, rewards) -> float:
        """One Adam step on the MSE over [delta-state | reward] targets.

        Returns the pre-step batch loss.
        """
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        if len(states) == 0:
            raise ValueError("empty training batch")
        actions = np.asarray(actions, dtype=np.int64).ravel()
        next_states = np.atleast_2d(np.asarray(next_states, dtype=np.float64))
        rewards = np.asarray(rewards, dtype=np.float64).ravel()
        targets = np.concatenate([next_states - states, rewards[:, None]], axis=1)
        xs = self._encode(states, actions)
        preds = self.network.forward_batch(xs)
        err = preds - targets
        loss = float(np.mean(err * err))
        upstream = 2.0 * err / err.size
        dws, dbs = self.network.grad_params_batch(xs, upstream)
        self.optimizer.step([self.network.theta],
                            [self.network.flatten_grads(dws, dbs)])
        return loss

    def predict(self, state, action: int):
        """(next_state, reward); next state is state + predicted delta,
        clipped into bounds."""
        state = np.asarray(state, dtype=np.float64)
        out = self.network.forward(np.concatenate([state, self._onehot(action)]))
        next_state = np.clip(state + out[:self.state_dim], self.lower, self.upper)
        return next_state, float(out[self.state_dim])

    def predict_batch(self, states: np.ndarray, actions: np.ndarray):
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        actions = np.asarray(actions, dtype=np.int64).ravel()
        out = self.network.forward_batch(self._encode(states, actions))
        next_states = np.clip(states + out[:, :self.state_dim],
                              self.lower, self.upper)
        return next_states, out[:, self.state_dim]

    def _onehot(self, action: int) -> np.ndarray:
        v = np.zeros(self.num_actions)
        v[action] = 1.0
        return v
