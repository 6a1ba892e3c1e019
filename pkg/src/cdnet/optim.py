"""Adam optimizer over DiffTensor parameters."""

import numpy as np


class Adam:
    """Standard Adam with bias correction; eps sits outside the sqrt.

    step() applies one update from the accumulated gradients and then zeroes
    them, so each optimizer step consumes exactly one backward pass.
    """

    def __init__(self, params, learning_rate=1e-3, betas=(0.9, 0.999), epsilon=1e-8):
        seen = set()
        self.params = []
        for p in params:
            if id(p) in seen:
                continue
            seen.add(id(p))
            if not p.requires_gradient:
                raise ValueError("Adam got a parameter with requires_gradient=False")
            self.params.append(p)
        if not self.params:
            raise ValueError("Adam needs at least one parameter")
        if learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {learning_rate}")
        b1, b2 = betas
        if not (0.0 <= b1 < 1.0 and 0.0 <= b2 < 1.0):
            raise ValueError(f"betas must lie in [0, 1), got {betas}")
        if epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        self.learning_rate = float(learning_rate)
        self.betas = (float(b1), float(b2))
        self.epsilon = float(epsilon)
        self._m = [np.zeros_like(p.values) for p in self.params]
        self._v = [np.zeros_like(p.values) for p in self.params]
        self._t = 0

    def step(self):
        self._t += 1
        b1, b2 = self.betas
        corr1 = 1.0 - b1 ** self._t
        corr2 = 1.0 - b2 ** self._t
        for p, m, v in zip(self.params, self._m, self._v):
            g = p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            p.values -= self.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + self.epsilon)
            p.grad.fill(0.0)


def adam_step(optimizer):
    """Apply one Adam update and zero the parameter gradients."""
    optimizer.step()
