"""Adam optimizer with bias correction."""
import numpy as np


class Adam:
    """Standard Adam: m/v moment tracking, bias-corrected step.

    Parameters are a name -> Tensor mapping; moments live per name so the
    optimizer state can be checkpointed alongside the model.
    """

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        if not (0.0 < beta1 < 1.0 and 0.0 < beta2 < 1.0):
            raise ValueError(f"betas must lie in (0, 1), got {beta1}, {beta2}")
        self.params = dict(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def step(self):
        """Apply one update from the gradients currently held by the parameters.

        Missing gradients are treated as zero (moments decay only).
        Non-finite gradients fail fast.
        """
        self.step_count += 1
        t = self.step_count
        correction1 = 1.0 - self.beta1 ** t
        correction2 = 1.0 - self.beta2 ** t
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                g = np.zeros_like(p.data)
            elif not np.isfinite(g).all():
                raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
            dtype = p.data.dtype
            b1 = dtype.type(self.beta1)
            b2 = dtype.type(self.beta2)
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (dtype.type(1.0) - b1) * g
            v *= b2
            v += (dtype.type(1.0) - b2) * (g * g)
            m_hat = m / dtype.type(correction1)
            v_hat = v / dtype.type(correction2)
            p.data -= dtype.type(self.lr) * m_hat / (np.sqrt(v_hat) + dtype.type(self.eps))

    def export_state(self):
        """Optimizer state as plain arrays (checkpoint payload)."""
        named = {"step": np.array([float(self.step_count)], dtype=np.float32)}
        for key, m in self.m.items():
            named[f"{key}/m"] = m
        for key, v in self.v.items():
            named[f"{key}/v"] = v
        return named

    def load_state(self, named):
        self.step_count = int(named["step"][0])
        for key in self.m:
            self.m[key][...] = named[f"{key}/m"]
            self.v[key][...] = named[f"{key}/v"]
