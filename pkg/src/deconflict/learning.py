"""Learned conflict resolution: oracle-labelled datasets, a small LSTM sequence
classifier trained with Adam, inference, and model/dataset files.

The classifier reads the planned position differences ``z_k = p1_k - p2_k``
(standardized per axis) and emits one softmax row over the six sides per
timestep.

Dataset files are JSON lines. The first line is a header::

    {"format": "deconflict-dataset", "version": 1, "H": 40, "dt": 0.1,
     "delta": 0.1, "rho": 0.05, "seed": 0, "n": 2000}

and every following line is one instance ``{"z": [[x, y, z], ...], "d": [...]}``
with ``H + 1`` difference triples and 1-based side labels.

Model files are ``.npz`` archives holding ``format`` and ``version`` tags, the
architecture as a JSON string, the weight arrays and the normalization
constants.
"""
from __future__ import annotations

import json
import zipfile
from dataclasses import asdict, dataclass, field

import numpy as np

from .geometry import N_SIDES, as_decisions, positions_of

MODEL_FORMAT = "deconflict-lstm"
MODEL_VERSION = 1
DATASET_FORMAT = "deconflict-dataset"
DATASET_VERSION = 1
PARAM_NAMES = ("Wx", "Wh", "b", "Wo", "bo")


class ModelFileError(ValueError):
    """Model file is truncated, not an archive, or missing fields."""


class ModelVersionError(ValueError):
    """Model file was written by an incompatible version."""


class DatasetFileError(ValueError):
    """Dataset file is malformed or has an unknown version."""


class TrainingDivergedError(FloatingPointError):
    """Training loss became non-finite."""


class ResampleBudgetError(RuntimeError):
    """Too many generated instances were rejected while building a dataset."""


# ---------------------------------------------------------------- datasets

@dataclass(frozen=True)
class TrainingExample:
    z: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        if z.ndim != 2 or z.shape[1] != 3:
            raise ValueError("z must have shape (H+1, 3)")
        d = as_decisions(self.labels, len(z))
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "labels", d)


@dataclass
class Dataset:
    """Stacked examples: ``z`` is ``(n, H+1, 3)``, ``labels`` ``(n, H+1)`` with values 1..6."""

    z: np.ndarray
    labels: np.ndarray
    dt: float = 0.1
    delta: float = 0.1
    rho: float = 0.05
    seed: int | None = None

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.z.ndim != 3 or self.z.shape[2] != 3:
            raise ValueError("z must have shape (n, H+1, 3)")
        if self.labels.shape != self.z.shape[:2]:
            raise ValueError("labels must have shape (n, H+1)")
        if self.labels.size and (self.labels.min() < 1 or self.labels.max() > N_SIDES):
            raise ValueError("labels must lie in 1..6")

    def __len__(self):
        return len(self.z)

    @property
    def horizon(self):
        return self.z.shape[1] - 1

    def example(self, i):
        return TrainingExample(self.z[i], self.labels[i])

    def subset(self, idx):
        return Dataset(self.z[idx], self.labels[idx], self.dt, self.delta, self.rho, self.seed)

    @classmethod
    def from_examples(cls, examples, **meta):
        examples = list(examples)
        if not examples:
            raise ValueError("no examples")
        return cls(np.stack([e.z for e in examples]), np.stack([e.labels for e in examples]), **meta)


def difference_sequence(x1, x2):
    """Planned position differences ``p1_k - p2_k``, shape ``(H+1, 3)``."""
    return positions_of(x1) - positions_of(x2)


def generate_dataset(n_instances, model, delta, rho, seed, scenario_params=None, max_rejects=None, backend=None):
    """Oracle-labelled colliding pairs.

    Each instance is a head-on pair from :func:`gen_colliding_pair`. The label
    is the centralized solver's side sequence, kept only if replaying it
    through both avoidance stages gives zero slack. Infeasible or rejected
    instances are replaced by fresh draws.

    Parameters
    ----------
    n_instances : int
    model : DynamicsModel
    delta, rho : float
        Separation and tube radius; requires ``rho >= delta / 2``.
    seed : int
    scenario_params : dict, optional
        Extra keyword arguments for :func:`gen_colliding_pair` (``T``,
        ``cube_half_width``, ``collision_point``, ``offset``). ``dt`` comes
        from ``model``.
    max_rejects : int, optional
        Rejection budget, default ``10 * n_instances + 100``.

    Raises
    ------
    ResampleBudgetError
        When more than ``max_rejects`` draws are rejected.
    """
    from .central import solve_central
    from .geometry import tube_from_trajectory
    from .lnf import run_stages
    from .scenarios import gen_colliding_pair

    if n_instances < 1:
        raise ValueError("n_instances must be positive")
    if rho < delta / 2:
        raise ValueError("tube radius must be at least delta / 2")
    params = dict(scenario_params or {})
    params.pop("dt", None)
    max_rejects = 10 * n_instances + 100 if max_rejects is None else max_rejects
    rng = np.random.default_rng(seed)
    zs, labels = [], []
    rejects = 0
    while len(zs) < n_instances:
        sc = gen_colliding_pair(int(rng.integers(2**31)), dt=model.dt, delta=delta, rho=rho, **params)
        plans = sc.preplans(model)
        x1, x2 = plans[1], plans[2]
        t1, t2 = tube_from_trajectory(x1, rho), tube_from_trajectory(x2, rho)
        res = solve_central(x1, x2, t1, t2, model, delta, backend=backend)
        ok = res.feasible and run_stages(x1, x2, t1, t2, res.decisions, model, delta, backend).zero_slack
        if not ok:
            rejects += 1
            if rejects > max_rejects:
                raise ResampleBudgetError(f"{rejects} instances rejected before reaching {n_instances}")
            continue
        zs.append(difference_sequence(x1, x2))
        labels.append(res.decisions)
    return Dataset(np.stack(zs), np.stack(labels), model.dt, delta, rho, int(seed))


def save_dataset(ds, path):
    header = {"format": DATASET_FORMAT, "version": DATASET_VERSION, "H": ds.horizon, "dt": ds.dt,
              "delta": ds.delta, "rho": ds.rho, "seed": ds.seed, "n": len(ds)}
    with open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        for z, d in zip(ds.z, ds.labels):
            fh.write(json.dumps({"z": z.tolist(), "d": d.tolist()}) + "\n")


def load_dataset(path):
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    try:
        header = json.loads(lines[0])
        if header.get("format") != DATASET_FORMAT:
            raise DatasetFileError("not a dataset file")
        if header.get("version") != DATASET_VERSION:
            raise DatasetFileError(f"unsupported dataset version {header.get('version')!r}")
        recs = [json.loads(ln) for ln in lines[1:]]
        z = np.array([r["z"] for r in recs], dtype=float).reshape(len(recs), header["H"] + 1, 3)
        d = np.array([r["d"] for r in recs], dtype=np.int64).reshape(len(recs), header["H"] + 1)
    except DatasetFileError:
        raise
    except (IndexError, KeyError, TypeError, ValueError) as exc:
        raise DatasetFileError(f"malformed dataset file: {exc}") from exc
    if len(recs) != header.get("n", len(recs)):
        raise DatasetFileError("record count does not match the header")
    return Dataset(z, d, header["dt"], header["delta"], header["rho"], header.get("seed"))


# ---------------------------------------------------------------- network

@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 256
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    seed: int = 0
    hidden: int = 32
    clip_norm: float = 5.0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.hidden < 1:
            raise ValueError("epochs, batch_size and hidden must be positive")
        if not self.learning_rate > 0 or not self.clip_norm > 0:
            raise ValueError("learning_rate and clip_norm must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("betas must lie in (0, 1)")


@dataclass
class SequenceClassifier:
    """One LSTM layer followed by a per-timestep dense softmax layer."""

    params: dict
    mean: np.ndarray
    scale: np.ndarray
    horizon: int
    arch: dict = field(default_factory=dict)

    @property
    def hidden(self):
        return self.params["Wh"].shape[0]


def init_params(n_in, hidden, rng):
    s = 1.0 / np.sqrt(hidden)
    b = np.zeros(4 * hidden)
    b[hidden:2 * hidden] = 1.0  # forget gate starts open
    return {"Wx": rng.uniform(-s, s, (n_in, 4 * hidden)), "Wh": rng.uniform(-s, s, (hidden, 4 * hidden)),
            "b": b, "Wo": rng.uniform(-s, s, (hidden, N_SIDES)), "bo": np.zeros(N_SIDES)}


def _sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def _softmax(a):
    e = np.exp(a - a.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def forward(params, X):
    """Class probabilities ``(B, T, 6)`` for standardized inputs ``X`` ``(B, T, n_in)``, plus a cache."""
    B, T, _ = X.shape
    h_dim = params["Wh"].shape[0]
    h = np.zeros((B, h_dim))
    c = np.zeros((B, h_dim))
    xw = X @ params["Wx"] + params["b"]
    hs = np.empty((B, T, h_dim))
    gates, cs = [], []
    for t in range(T):
        a = xw[:, t] + h @ params["Wh"]
        i = _sigmoid(a[:, :h_dim])
        f = _sigmoid(a[:, h_dim:2 * h_dim])
        g = np.tanh(a[:, 2 * h_dim:3 * h_dim])
        o = _sigmoid(a[:, 3 * h_dim:])
        c_prev = c
        c = f * c + i * g
        h = o * np.tanh(c)
        hs[:, t] = h
        gates.append((i, f, g, o, c_prev))
        cs.append(c)
    probs = _softmax(hs @ params["Wo"] + params["bo"])
    return probs, (X, hs, gates, cs)


def loss_and_grad(params, X, Y):
    """Mean per-timestep cross-entropy for 0-based labels ``Y`` ``(B, T)`` and its gradient."""
    probs, (X, hs, gates, cs) = forward(params, X)
    B, T = Y.shape
    n = B * T
    p_true = np.take_along_axis(probs, Y[..., None], axis=-1)[..., 0]
    loss = -np.mean(np.log(np.maximum(p_true, 1e-300)))
    dlog = probs.copy()
    np.put_along_axis(dlog, Y[..., None], np.take_along_axis(dlog, Y[..., None], axis=-1) - 1.0, axis=-1)
    dlog /= n
    grads = {"Wo": np.einsum("bth,btk->hk", hs, dlog), "bo": dlog.sum(axis=(0, 1))}
    dhs = dlog @ params["Wo"].T
    h_dim = params["Wh"].shape[0]
    dWh = np.zeros_like(params["Wh"])
    da_all = np.empty((B, T, 4 * h_dim))
    dh_next = np.zeros((B, h_dim))
    dc_next = np.zeros((B, h_dim))
    for t in range(T - 1, -1, -1):
        i, f, g, o, c_prev = gates[t]
        tc = np.tanh(cs[t])
        dh = dhs[:, t] + dh_next
        dc = dc_next + dh * o * (1.0 - tc * tc)
        da = np.concatenate([dc * g * i * (1.0 - i), dc * c_prev * f * (1.0 - f),
                             dc * i * (1.0 - g * g), dh * tc * o * (1.0 - o)], axis=1)
        da_all[:, t] = da
        h_prev = hs[:, t - 1] if t > 0 else np.zeros((B, h_dim))
        dWh += h_prev.T @ da
        dh_next = da @ params["Wh"].T
        dc_next = dc * f
    grads["Wh"] = dWh
    grads["Wx"] = np.einsum("bti,btj->ij", X, da_all)
    grads["b"] = da_all.sum(axis=(0, 1))
    return float(loss), grads


def _loss(params, X, Y):
    probs = forward(params, X)[0]
    p_true = np.take_along_axis(probs, Y[..., None], axis=-1)
    return float(-np.mean(np.log(np.maximum(p_true, 1e-300))))


def _standardize(z, mean, scale):
    return (np.asarray(z, dtype=float) - mean) / scale


@dataclass
class TrainResult:
    model: SequenceClassifier
    losses: list
    initial_loss: float
    final_loss: float


def train(ds, config=TrainConfig(), verbose=False):
    """Fit a classifier to ``ds`` with minibatch Adam on the mean cross-entropy.

    Deterministic for a fixed ``config.seed`` and dataset. ``losses`` holds the
    mean minibatch loss of every epoch; ``initial_loss`` and ``final_loss`` are
    full-data losses before and after training.

    Raises
    ------
    TrainingDivergedError
        If the loss or a gradient becomes non-finite.
    """
    if len(ds) == 0:
        raise ValueError("empty dataset")
    rng = np.random.default_rng(config.seed)
    flat = ds.z.reshape(-1, 3)
    mean = flat.mean(axis=0)
    scale = flat.std(axis=0)
    scale = np.where(scale > 1e-12, scale, 1.0)
    X = _standardize(ds.z, mean, scale)
    Y = ds.labels - 1
    params = init_params(3, config.hidden, rng)
    m = {k: np.zeros_like(v) for k, v in params.items()}
    v = {k: np.zeros_like(v) for k, v in params.items()}
    initial = _loss(params, X, Y)
    losses = []
    t = 0
    for epoch in range(config.epochs):
        order = rng.permutation(len(X))
        total = 0.0
        for s in range(0, len(X), config.batch_size):
            idx = order[s:s + config.batch_size]
            loss, g = loss_and_grad(params, X[idx], Y[idx])
            norm = np.sqrt(sum(float(np.sum(a * a)) for a in g.values()))
            if not (np.isfinite(loss) and np.isfinite(norm)):
                raise TrainingDivergedError(f"non-finite loss in epoch {epoch}")
            if norm > config.clip_norm:
                g = {k: a * (config.clip_norm / norm) for k, a in g.items()}
            total += loss * len(idx)
            t += 1
            lr = config.learning_rate * np.sqrt(1 - config.beta2**t) / (1 - config.beta1**t)
            for k in params:
                m[k] = config.beta1 * m[k] + (1 - config.beta1) * g[k]
                v[k] = config.beta2 * v[k] + (1 - config.beta2) * g[k] * g[k]
                params[k] = params[k] - lr * m[k] / (np.sqrt(v[k]) + 1e-8)
        losses.append(total / len(X))
        if verbose:
            print(f"epoch {epoch + 1:4d}  loss {losses[-1]:.4f}")
    arch = {"kind": "lstm", "n_in": 3, "hidden": config.hidden, "n_out": N_SIDES, "train": asdict(config)}
    final = _loss(params, X, Y)
    if not np.isfinite(final):
        raise TrainingDivergedError("non-finite loss after training")
    return TrainResult(SequenceClassifier(params, mean, scale, ds.horizon, arch), losses, initial, final)


def predict(model, z):
    """Per-timestep side probabilities ``(H+1, 6)`` for one difference sequence."""
    z = np.asarray(z, dtype=float)
    if z.shape != (model.horizon + 1, 3):
        raise ValueError(f"expected z of shape ({model.horizon + 1}, 3), got {z.shape}")
    probs, _ = forward(model.params, _standardize(z, model.mean, model.scale)[None])
    return probs[0]


def predict_batch(model, Z):
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 3 or Z.shape[1:] != (model.horizon + 1, 3):
        raise ValueError("expected Z of shape (n, H+1, 3)")
    return forward(model.params, _standardize(Z, model.mean, model.scale))[0]


def accuracy(model, ds):
    """Fraction of timesteps whose argmax matches the label."""
    pred = np.argmax(predict_batch(model, ds.z), axis=-1) + 1
    return float(np.mean(pred == ds.labels))


# ---------------------------------------------------------------- files

def save_model(model, path):
    arch = dict(model.arch, horizon=model.horizon)
    arrays = {k: model.params[k] for k in PARAM_NAMES}
    with open(path, "wb") as fh:
        np.savez(fh, format=np.array(MODEL_FORMAT), version=np.array(MODEL_VERSION),
                 arch=np.array(json.dumps(arch)), mean=model.mean, scale=model.scale, **arrays)


def load_model(path):
    """Read a model written by :func:`save_model`.

    Raises
    ------
    ModelFileError
        On a truncated or foreign file.
    ModelVersionError
        On a version tag other than the current one.
    """
    try:
        with np.load(path, allow_pickle=False) as f:
            data = {k: f[k] for k in f.files}
    except (OSError, ValueError, EOFError, zipfile.BadZipFile) as exc:
        raise ModelFileError(f"cannot read model file {path}: {exc}") from exc
    try:
        if str(data["format"]) != MODEL_FORMAT:
            raise ModelFileError("not a classifier model file")
        if int(data["version"]) != MODEL_VERSION:
            raise ModelVersionError(f"model version {int(data['version'])} is not {MODEL_VERSION}")
        arch = json.loads(str(data["arch"]))
        params = {k: data[k] for k in PARAM_NAMES}
        return SequenceClassifier(params, data["mean"], data["scale"], int(arch.pop("horizon")), arch)
    except KeyError as exc:
        raise ModelFileError(f"model file lacks field {exc}") from exc
