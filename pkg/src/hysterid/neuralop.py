"""Dense networks, their operator combination and full-batch Adam training.

The operator model couples a branch network (function samples in, p features
out) and a trunk network (query coordinates in, p features out) through an
inner product plus a scalar bias c0.  Inputs and targets are standardized
with stored statistics; the product acts in standardized space and
predictions are mapped back to target units on the way out.

All parameters live in float64 numpy arrays.  The flat parameter layout
(used by Adam and the checkpoint format) is: branch layers in order, weight
matrix then bias per layer, then the trunk layers likewise, then c0.
"""

import json
from dataclasses import dataclass

import numpy as np

CHECKPOINT_MAGIC = b"HYSTERID1\n"


class TrainingDivergence(RuntimeError):
    """Loss became non-finite during training."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


def elu(x):
    x = np.asarray(x, dtype=float)
    return np.where(x >= 0.0, x, np.expm1(np.minimum(x, 0.0)))


def _elu_prime_from_output(h):
    # for x < 0 the output is exp(x) - 1, so the slope is output + 1
    return np.where(h >= 0.0, 1.0, h + 1.0)


# ---------------------------------------------------------------------------
# dense feed-forward network
# ---------------------------------------------------------------------------

class DenseNet:
    """Fully connected network, ELU on hidden layers, identity output."""

    def __init__(self, weights, biases):
        if len(weights) != len(biases):
            raise ValueError("need one bias vector per weight matrix")
        for w, b in zip(weights, biases):
            if w.shape[1] != b.shape[0]:
                raise ValueError("bias length must match layer width")
        for w_out, w_in in zip(weights, weights[1:]):
            if w_out.shape[1] != w_in.shape[0]:
                raise ValueError("inconsistent width chain")
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]

    @classmethod
    def init(cls, widths, rng):
        """Glorot-uniform weights, zero biases."""
        weights, biases = [], []
        for fan_in, fan_out in zip(widths, widths[1:]):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases)

    @property
    def widths(self):
        return tuple([self.weights[0].shape[0]]
                     + [w.shape[1] for w in self.weights])

    @property
    def n_params(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def forward(self, x):
        return self.forward_cache(x)[-1]

    def forward_cache(self, x):
        """Activations per layer: [input, h1, ..., output]."""
        hs = [np.asarray(x, dtype=float)]
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            a = hs[-1] @ w + b
            hs.append(a if i == last else elu(a))
        return hs

    def backward(self, hs, grad_out):
        """Gradients wrt weights/biases given dJ/d(output); also dJ/d(input)."""
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        g = np.asarray(grad_out, dtype=float)
        for i in range(len(self.weights) - 1, -1, -1):
            da = g if i == len(self.weights) - 1 \
                else g * _elu_prime_from_output(hs[i + 1])
            grads_w[i] = hs[i].T @ da
            grads_b[i] = da.sum(axis=0)
            g = da @ self.weights[i].T
        return grads_w, grads_b, g


# ---------------------------------------------------------------------------
# operator model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OperatorArch:
    """Widths of the branch/trunk pair and the combination width p."""

    branch_input: int
    trunk_input: int
    p: int
    branch_hidden: tuple = (50, 50, 50)
    trunk_hidden: tuple = (50, 50)

    def __post_init__(self):
        if min(self.branch_input, self.trunk_input, self.p) < 1:
            raise ValueError("layer sizes must be >= 1")
        object.__setattr__(self, "branch_hidden", tuple(self.branch_hidden))
        object.__setattr__(self, "trunk_hidden", tuple(self.trunk_hidden))

    @property
    def branch_widths(self):
        return (self.branch_input,) + self.branch_hidden + (self.p,)

    @property
    def trunk_widths(self):
        return (self.trunk_input,) + self.trunk_hidden + (self.p,)


def _identity_stats(dim):
    return np.zeros(dim), np.ones(dim)


def feature_stats(x):
    """Per-feature mean and sd; constant features get sd 1 so the shift
    still centres them without dividing by zero."""
    x = np.asarray(x, dtype=float)
    mean = x.mean(axis=0)
    sd = x.std(axis=0)
    sd = np.where(sd < 1e-12, 1.0, sd)
    return mean, sd


def _unpack_batch(batch):
    """(branch, trunk, target) or (branch, trunk, target, branch_index).

    The indexed form carries one branch row per source function and an int
    array mapping every trunk/target row to its branch row, avoiding the
    repeated branch evaluations of the flattened form.
    """
    if len(batch) == 3:
        branch_in, trunk_in, target = batch
        return branch_in, trunk_in, target, None
    branch_in, trunk_in, target, idx = batch
    return branch_in, trunk_in, target, np.asarray(idx, dtype=int)


class OperatorModel:
    """Branch/trunk pair, bias c0 and normalization statistics."""

    def __init__(self, arch, branch, trunk, c0=0.0, norms=None, meta=None):
        self.arch = arch
        self.branch = branch
        self.trunk = trunk
        self._c0 = np.array([float(c0)])
        if norms is None:
            norms = {"branch": _identity_stats(arch.branch_input),
                     "trunk": _identity_stats(arch.trunk_input),
                     "target": (0.0, 1.0)}
        self.norms = norms
        self.meta = dict(meta or {})
        if branch.widths != arch.branch_widths:
            raise ValueError("branch widths do not match the architecture")
        if trunk.widths != arch.trunk_widths:
            raise ValueError("trunk widths do not match the architecture")
        for key in ("branch", "trunk", "target"):
            if np.any(np.asarray(norms[key][1]) <= 0.0):
                raise ValueError("normalization sds must be positive")

    @property
    def c0(self):
        return float(self._c0[0])

    @property
    def n_params(self):
        return self.branch.n_params + self.trunk.n_params + 1

    def set_normalization(self, branch_in, trunk_in, targets):
        """Fit the standardization statistics on training arrays."""
        self.norms = {"branch": feature_stats(branch_in),
                      "trunk": feature_stats(trunk_in),
                      "target": (float(np.mean(targets)),
                                 max(float(np.std(targets)), 1e-12))}

    def _standardize(self, key, x):
        mean, sd = self.norms[key]
        return (np.asarray(x, dtype=float) - mean) / sd

    def forward(self, branch_in, trunk_in, branch_index=None):
        """Operator output in target units, shape (N,).

        With branch_index, branch_in holds one row per source function and
        branch_index maps each trunk row to its branch row.
        """
        return self._forward_cache(branch_in, trunk_in, branch_index)[0]

    def _forward_cache(self, branch_in, trunk_in, branch_index=None):
        hb = self.branch.forward_cache(self._standardize("branch", branch_in))
        ht = self.trunk.forward_cache(self._standardize("trunk", trunk_in))
        b_out = hb[-1] if branch_index is None else hb[-1][branch_index]
        g_std = self.c0 + np.sum(b_out * ht[-1], axis=1)
        mu, sd = self.norms["target"]
        return mu + sd * g_std, hb, ht

    def loss(self, batch):
        branch_in, trunk_in, target, idx = _unpack_batch(batch)
        pred = self.forward(branch_in, trunk_in, idx)
        return float(np.mean((pred - np.asarray(target, dtype=float)) ** 2))

    def loss_and_gradient(self, batch):
        """Mean squared error and its exact gradient as a flat vector."""
        branch_in, trunk_in, target, idx = _unpack_batch(batch)
        target = np.asarray(target, dtype=float)
        pred, hb, ht = self._forward_cache(branch_in, trunk_in, idx)
        n = target.shape[0]
        resid = pred - target
        loss = float(np.mean(resid ** 2))
        _, sd_t = self.norms["target"]
        dg = (2.0 * sd_t / n) * resid
        dc0 = dg.sum()
        if idx is None:
            d_branch_out = dg[:, None] * ht[-1]
            d_trunk_out = dg[:, None] * hb[-1]
        else:
            d_branch_out = np.zeros_like(hb[-1])
            np.add.at(d_branch_out, idx, dg[:, None] * ht[-1])
            d_trunk_out = dg[:, None] * hb[-1][idx]
        bw, bb, _ = self.branch.backward(hb, d_branch_out)
        tw, tb, _ = self.trunk.backward(ht, d_trunk_out)
        flat = np.concatenate(
            [np.concatenate([w.ravel(), b.ravel()])
             for w, b in zip(bw, bb)]
            + [np.concatenate([w.ravel(), b.ravel()])
               for w, b in zip(tw, tb)]
            + [np.array([dc0])])
        return loss, flat

    def get_flat(self):
        """Parameters as one float64 vector (layout in the module docstring)."""
        parts = []
        for net in (self.branch, self.trunk):
            for w, b in zip(net.weights, net.biases):
                parts.append(w.ravel())
                parts.append(b.ravel())
        parts.append(self._c0)
        return np.concatenate(parts)

    def set_flat(self, vec):
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters")
        pos = 0
        for net in (self.branch, self.trunk):
            for i, (w, b) in enumerate(zip(net.weights, net.biases)):
                net.weights[i] = vec[pos:pos + w.size].reshape(w.shape).copy()
                pos += w.size
                net.biases[i] = vec[pos:pos + b.size].copy()
                pos += b.size
        self._c0 = vec[pos:pos + 1].copy()


def init_model(arch, seed, meta=None):
    """Glorot-uniform weights (branch first, then trunk), zero biases, c0 = 0."""
    rng = np.random.default_rng(seed)
    branch = DenseNet.init(arch.branch_widths, rng)
    trunk = DenseNet.init(arch.trunk_widths, rng)
    meta = dict(meta or {})
    meta.setdefault("init_seed", None if seed is None else int(seed))
    return OperatorModel(arch, branch, trunk, meta=meta)


# ---------------------------------------------------------------------------
# Adam with step decay
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AdamConfig:
    lr0: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 10000
    halve_every: int = 2500

    def __post_init__(self):
        if self.lr0 <= 0:
            raise ValueError("lr0 must be positive")
        if self.halve_every < 1:
            raise ValueError("halve_every must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")

    def lr_at(self, epoch):
        return self.lr0 * 2.0 ** (-(epoch // self.halve_every))


def adam_minimize(fn, theta0, config, log_every=100):
    """Full-batch Adam on a flat parameter vector.

    fn(theta) must return (loss, gradient).  Returns the final vector and a
    history list of (epoch, loss) rows: epoch 0, every log_every epochs and
    the final epoch (loss evaluated before the update at each logged epoch,
    plus one evaluation after the last update).
    """
    theta = np.array(theta0, dtype=float)
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    history = []
    for epoch in range(config.epochs):
        loss, grad = fn(theta)
        if not np.isfinite(loss):
            raise TrainingDivergence(
                f"loss became non-finite at epoch {epoch}", epoch=epoch)
        if epoch % log_every == 0:
            history.append((epoch, loss))
        m = config.beta1 * m + (1.0 - config.beta1) * grad
        v = config.beta2 * v + (1.0 - config.beta2) * grad * grad
        t = epoch + 1
        m_hat = m / (1.0 - config.beta1 ** t)
        v_hat = v / (1.0 - config.beta2 ** t)
        theta = theta - config.lr_at(epoch) * m_hat / (np.sqrt(v_hat)
                                                       + config.eps)
    final_loss, _ = fn(theta)
    if not np.isfinite(final_loss):
        raise TrainingDivergence(
            f"loss became non-finite at epoch {config.epochs}",
            epoch=config.epochs)
    history.append((config.epochs, final_loss))
    return theta, history


def train(model, batch, config, log_every=100):
    """Train the operator model in place; returns the loss history."""

    def fn(theta):
        model.set_flat(theta)
        return model.loss_and_gradient(batch)

    theta, history = adam_minimize(fn, model.get_flat(), config,
                                   log_every=log_every)
    model.set_flat(theta)
    model.meta["epochs_trained"] = int(config.epochs)
    return history


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def _norm_pair_to_json(pair):
    mean, sd = pair
    return [np.asarray(mean, dtype=float).tolist(),
            np.asarray(sd, dtype=float).tolist()]


def _norm_pair_from_json(pair, scalar):
    mean, sd = pair
    if scalar:
        return float(mean), float(sd)
    return np.asarray(mean, dtype=float), np.asarray(sd, dtype=float)


def save_checkpoint(model, path):
    """Magic, length-prefixed JSON header, then the flat float64 parameters
    (little endian)."""
    header = {
        "format": "hysterid-checkpoint-v1",
        "arch": {"branch_input": model.arch.branch_input,
                 "trunk_input": model.arch.trunk_input,
                 "p": model.arch.p,
                 "branch_hidden": list(model.arch.branch_hidden),
                 "trunk_hidden": list(model.arch.trunk_hidden)},
        "norms": {key: _norm_pair_to_json(model.norms[key])
                  for key in ("branch", "trunk", "target")},
        "meta": model.meta,
        "n_params": int(model.n_params),
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(len(blob).to_bytes(8, "little"))
        fh.write(blob)
        fh.write(model.get_flat().astype("<f8").tobytes())


def load_checkpoint(path):
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        size = int.from_bytes(fh.read(8), "little")
        header = json.loads(fh.read(size).decode())
        raw = fh.read()
    arch = OperatorArch(
        branch_input=header["arch"]["branch_input"],
        trunk_input=header["arch"]["trunk_input"],
        p=header["arch"]["p"],
        branch_hidden=tuple(header["arch"]["branch_hidden"]),
        trunk_hidden=tuple(header["arch"]["trunk_hidden"]))
    norms = {"branch": _norm_pair_from_json(header["norms"]["branch"], False),
             "trunk": _norm_pair_from_json(header["norms"]["trunk"], False),
             "target": _norm_pair_from_json(header["norms"]["target"], True)}
    model = init_model(arch, seed=0, meta=header.get("meta"))
    model.norms = norms
    params = np.frombuffer(raw, dtype="<f8").astype(float)
    if params.size != header["n_params"]:
        raise ValueError(f"{path}: parameter payload has {params.size} "
                         f"values, header says {header['n_params']}")
    model.set_flat(params)
    return model
