"""First-order optimizers and target-network blending."""

import numpy as np

from .autodiff import ShapeError


class SGD:
    """Plain gradient descent: p <- p - lr * g."""

    def __init__(self, params, lr):
        if lr <= 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        self.params = list(params)
        self.lr = float(lr)

    def step(self):
        for p in self.params:
            if p.grad is None:
                continue
            if p.grad.shape != p.data.shape:
                raise ShapeError(f"sgd: grad shape {p.grad.shape} != param shape {p.data.shape}")
            p.data -= self.lr * p.grad

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def state_dict(self):
        return {"kind": "sgd", "lr": self.lr}

    def load_state_dict(self, state):
        self.lr = float(state["lr"])


class Adam:
    """Bias-corrected Adam. Moment buffers mirror each parameter's shape."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        if lr <= 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        self.params = list(params)
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for i, p in enumerate(self.params):
            g = p.grad
            if g is None:
                g = np.zeros_like(p.data)
            elif g.shape != p.data.shape:
                raise ShapeError(f"adam: grad shape {g.shape} != param shape {p.data.shape}")
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            m_hat = self.m[i] / b1t
            v_hat = self.v[i] / b2t
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def state_dict(self):
        return {
            "kind": "adam",
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "t": self.t,
            "m": [m.ravel().tolist() for m in self.m],
            "v": [v.ravel().tolist() for v in self.v],
        }

    def load_state_dict(self, state):
        self.lr = float(state["lr"])
        self.beta1 = float(state["beta1"])
        self.beta2 = float(state["beta2"])
        self.eps = float(state["eps"])
        self.t = int(state["t"])
        if len(state["m"]) != len(self.params):
            raise ShapeError("adam: state has wrong number of moment buffers")
        for i, p in enumerate(self.params):
            m = np.asarray(state["m"][i], dtype=np.float64)
            v = np.asarray(state["v"][i], dtype=np.float64)
            if m.size != p.data.size or v.size != p.data.size:
                raise ShapeError(f"adam: moment size mismatch for param of shape {p.data.shape}")
            self.m[i] = m.reshape(p.data.shape)
            self.v[i] = v.reshape(p.data.shape)


def make_optimizer(params, kind="adam", lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    if kind == "adam":
        return Adam(params, lr=lr, beta1=beta1, beta2=beta2, eps=eps)
    if kind == "sgd":
        return SGD(params, lr=lr)
    raise ValueError(f"unknown optimizer kind: {kind!r}")


def soft_update(targets, onlines, mix):
    """Blend target parameters toward online ones: t <- mix*o + (1-mix)*t."""
    if not 0.0 < mix <= 1.0:
        raise ValueError(f"mix must be in (0, 1], got {mix}")
    targets = list(targets)
    onlines = list(onlines)
    if len(targets) != len(onlines):
        raise ShapeError("soft_update: parameter lists differ in length")
    for t, o in zip(targets, onlines):
        if t.data.shape != o.data.shape:
            raise ShapeError(f"soft_update: shape {t.data.shape} != {o.data.shape}")
        if mix == 1.0:
            t.data = o.data.copy()
        else:
            t.data = mix * o.data + (1.0 - mix) * t.data


def clip_grad_norm(params, max_norm):
    """Scale gradients so their global L2 norm is at most max_norm."""
    total = 0.0
    grads = [p.grad for p in params if p.grad is not None]
    for g in grads:
        total += float((g * g).sum())
    norm = total**0.5
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for g in grads:
            g *= scale
    return norm
