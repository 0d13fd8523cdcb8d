"""Trainable spectral-filter node classifier: forward, gradients, Adam, loops."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.stats

from specband.filters import FilterBank, build_filter_bank, poly_apply
from specband.graphs import Dataset, SplitMask, normalized_adjacency, normalized_adjacency_sparse
from specband.partition import identify_significant_gaps
from specband.spectral import Spectrum, eigendecompose

VARIANTS = ("piecewise", "poly_only", "free_eigenvalues")
ACTIVATIONS = ("relu", "identity", "tanh")

CHECKPOINT_MAGIC = b"SBCK\x01\n"


class ModelError(ValueError):
    """Invalid model configuration or state."""


@dataclass(frozen=True)
class ModelConfig:
    """Hyperparameters for one training run."""

    num_intervals: int = 8
    poly_degree: int = 5
    hidden_dim: int = 64
    num_layers: int = 1
    feat_dropout: float = 0.0
    hidden_dropout: float = 0.0
    learning_rate: float = 0.01
    weight_decay: float = 0.0
    epochs: int = 2000
    activation: str = "relu"
    seed: int = 0
    window_size: int = 5
    use_pos: bool = True
    use_neg: bool = True
    use_poly: bool = True
    variant: str = "piecewise"
    sparsify_budget: int | None = None
    decay_coefficients: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ModelError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.activation not in ACTIVATIONS:
            raise ModelError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        for name in ("feat_dropout", "hidden_dropout"):
            rate = getattr(self, name)
            if not 0.0 <= rate < 1.0:
                raise ModelError(f"{name} must be in [0, 1), got {rate}")
        if self.hidden_dim < 1 or self.num_layers < 1:
            raise ModelError("hidden_dim and num_layers must be >= 1")
        if self.epochs < 1:
            raise ModelError(f"epochs must be >= 1, got {self.epochs}")
        if self.num_intervals < 0 or self.poly_degree < 0:
            raise ModelError("num_intervals and poly_degree must be >= 0")
        if self.window_size < 1:
            raise ModelError(f"window_size must be >= 1, got {self.window_size}")
        if self.learning_rate <= 0:
            raise ModelError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.weight_decay < 0:
            raise ModelError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.variant == "piecewise" and not (self.use_pos or self.use_neg or self.use_poly):
            raise ModelError("at least one of use_pos/use_neg/use_poly must be enabled")

    def effective_toggles(self) -> tuple[bool, bool, bool]:
        if self.variant == "poly_only":
            return (False, False, True)
        if self.variant == "free_eigenvalues":
            return (False, False, False)
        return (self.use_pos, self.use_neg, self.use_poly)

    def to_json(self) -> dict:
        return {
            "num_intervals": self.num_intervals,
            "poly_degree": self.poly_degree,
            "hidden_dim": self.hidden_dim,
            "num_layers": self.num_layers,
            "feat_dropout": self.feat_dropout,
            "hidden_dropout": self.hidden_dropout,
            "learning_rate": self.learning_rate,
            "weight_decay": self.weight_decay,
            "epochs": self.epochs,
            "activation": self.activation,
            "seed": self.seed,
            "window_size": self.window_size,
            "use_pos": self.use_pos,
            "use_neg": self.use_neg,
            "use_poly": self.use_poly,
            "variant": self.variant,
            "sparsify_budget": self.sparsify_budget,
            "decay_coefficients": self.decay_coefficients,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ModelConfig":
        return cls(**obj)


def _act(a: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(a, 0.0)
    if kind == "tanh":
        return np.tanh(a)
    return a


def _act_grad(a: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (a > 0.0).astype(np.float64)
    if kind == "tanh":
        t = np.tanh(a)
        return 1.0 - t * t
    return np.ones_like(a)


def _mask_indices(mask, n: int) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.dtype == bool:
        if mask.shape != (n,):
            raise ModelError(f"boolean mask must have length {n}")
        idx = np.flatnonzero(mask)
    else:
        idx = mask.astype(np.int64)
        if idx.ndim != 1 or (idx.size and (idx.min() < 0 or idx.max() >= n)):
            raise ModelError("index mask out of range")
    if idx.size == 0:
        raise ModelError("mask selects no nodes")
    return idx


class Model:
    """Parameter container with optimizer state and a reverse-mode tape."""

    def __init__(self, cfg: ModelConfig, mlp: list[np.ndarray], readout: np.ndarray,
                 coef_pos: np.ndarray | None, coef_neg: np.ndarray | None,
                 poly_coef: np.ndarray | None, spectrum_params: np.ndarray | None):
        self.cfg = cfg
        self.mlp = mlp
        self.readout = readout
        self.coef_pos = coef_pos
        self.coef_neg = coef_neg
        self.poly_coef = poly_coef
        self.spectrum_params = spectrum_params
        self._adam_m: dict[str, np.ndarray] = {}
        self._adam_v: dict[str, np.ndarray] = {}
        self._tape: dict | None = None

    @classmethod
    def init(cls, cfg: ModelConfig, feature_dim: int, num_classes: int, bank: FilterBank,
             rng: np.random.Generator) -> "Model":
        def glorot(fan_in, fan_out):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            return rng.uniform(-bound, bound, size=(fan_in, fan_out))

        mlp = []
        fan_in = feature_dim
        for _ in range(cfg.num_layers):
            mlp.append(glorot(fan_in, cfg.hidden_dim))
            fan_in = cfg.hidden_dim
        readout = glorot(cfg.hidden_dim, num_classes)
        use_pos, use_neg, use_poly = cfg.effective_toggles()
        k = bank.num_intervals
        coef_pos = np.zeros((k, num_classes)) if use_pos and k else None
        coef_neg = np.zeros((k, num_classes)) if use_neg and k else None
        poly_coef = None
        if use_poly:
            poly_coef = np.zeros((cfg.poly_degree + 1, num_classes))
            poly_coef[0, :] = 1.0  # identity filtering at step zero
        spectrum_params = None
        if cfg.variant == "free_eigenvalues":
            spectrum_params = bank.spectrum.eigenvalues.copy()
        return cls(cfg, mlp, readout, coef_pos, coef_neg, poly_coef, spectrum_params)

    def parameters(self) -> dict[str, np.ndarray]:
        params = {f"mlp_{i}": w for i, w in enumerate(self.mlp)}
        params["readout"] = self.readout
        if self.coef_pos is not None:
            params["coef_pos"] = self.coef_pos
        if self.coef_neg is not None:
            params["coef_neg"] = self.coef_neg
        if self.poly_coef is not None:
            params["poly_coef"] = self.poly_coef
        if self.spectrum_params is not None:
            params["spectrum_params"] = self.spectrum_params
        return params

    def set_parameter(self, name: str, value: np.ndarray) -> None:
        if name.startswith("mlp_"):
            self.mlp[int(name[4:])] = value
        elif name == "readout":
            self.readout = value
        elif name == "coef_pos":
            self.coef_pos = value
        elif name == "coef_neg":
            self.coef_neg = value
        elif name == "poly_coef":
            self.poly_coef = value
        elif name == "spectrum_params":
            self.spectrum_params = value
        else:
            raise ModelError(f"unknown parameter {name!r}")

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.parameters().items()}

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        for k, v in snap.items():
            self.set_parameter(k, v.copy())


def forward(m: Model, bank: FilterBank, x: np.ndarray, train_mode: bool = False,
            rng: np.random.Generator | None = None) -> np.ndarray:
    """Filtered logits for every node; records a tape for loss_and_grads."""
    cfg = m.cfg
    x = np.asarray(x, dtype=np.float64)
    if m.mlp and x.shape[1] != m.mlp[0].shape[0]:
        raise ModelError(f"feature dim {x.shape[1]} != expected {m.mlp[0].shape[0]}")
    feat_mask = None
    x_used = x
    if train_mode and cfg.feat_dropout > 0.0:
        if rng is None:
            raise ModelError("dropout in train mode needs an rng")
        keep = 1.0 - cfg.feat_dropout
        feat_mask = (rng.random(x.shape) < keep).astype(np.float64) / keep
        x_used = x * feat_mask

    hs = [x_used]
    pre = []
    hid_masks: list[np.ndarray | None] = []
    for w in m.mlp:
        a = hs[-1] @ w
        pre.append(a)
        h = _act(a, cfg.activation)
        hm = None
        if train_mode and cfg.hidden_dropout > 0.0:
            if rng is None:
                raise ModelError("dropout in train mode needs an rng")
            keep = 1.0 - cfg.hidden_dropout
            hm = (rng.random(h.shape) < keep).astype(np.float64) / keep
            h = h * hm
        hid_masks.append(hm)
        hs.append(h)
    g = hs[-1] @ m.readout

    use_pos, use_neg, use_poly = cfg.effective_toggles()
    z = np.zeros_like(g)
    s_pos: list[np.ndarray] = []
    s_neg: list[np.ndarray] = []
    q_pows: list[np.ndarray] = []
    b_free = None
    if cfg.variant == "free_eigenvalues":
        u = bank.spectrum.eigenvectors
        b_free = u.T @ g
        z = u @ (m.spectrum_params[:, None] * b_free)
    else:
        for k, f in enumerate(bank.constants):
            if use_pos:
                s = f.pos @ g
                s_pos.append(s)
                z += s * m.coef_pos[k][None, :]
            if use_neg:
                s = f.neg @ g
                s_neg.append(s)
                z += s * m.coef_neg[k][None, :]
        if use_poly:
            q_pows = poly_apply(bank.adjacency, g, cfg.poly_degree)
            for p, q in enumerate(q_pows):
                z += q * m.poly_coef[p][None, :]
    if not np.all(np.isfinite(z)):
        raise ModelError("non-finite logits in forward pass")
    m._tape = {
        "x": x,
        "feat_mask": feat_mask,
        "hs": hs,
        "pre": pre,
        "hid_masks": hid_masks,
        "g": g,
        "s_pos": s_pos,
        "s_neg": s_neg,
        "q_pows": q_pows,
        "b_free": b_free,
        "bank": bank,
        "logits": z,
    }
    return z


def masked_cross_entropy(logits: np.ndarray, labels: np.ndarray, mask) -> float:
    """Mean softmax cross-entropy over the masked nodes (duplicates count)."""
    idx = _mask_indices(mask, logits.shape[0])
    z = logits[idx]
    z = z - z.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return float(-logp[np.arange(idx.size), labels[idx]].mean())


def loss_and_grads(m: Model, logits: np.ndarray, labels: np.ndarray,
                   mask) -> tuple[float, dict[str, np.ndarray]]:
    """Cross-entropy loss plus analytic gradients for every parameter tensor.

    Requires the tape recorded by the forward pass that produced `logits`.
    Weight decay enters as 0.5 * wd * ||W||^2 on the dense weights (and on
    the filter coefficients only when decay_coefficients is set).
    """
    tape = m._tape
    if tape is None or tape["logits"] is not logits:
        raise ModelError("loss_and_grads needs the logits of the latest forward pass")
    cfg = m.cfg
    labels = np.asarray(labels, dtype=np.int64)
    n, c = logits.shape
    idx = _mask_indices(mask, n)

    z = logits[idx]
    zmax = z.max(axis=1, keepdims=True)
    zs = z - zmax
    expz = np.exp(zs)
    probs = expz / expz.sum(axis=1, keepdims=True)
    logp = zs - np.log(expz.sum(axis=1, keepdims=True))
    ce = float(-logp[np.arange(idx.size), labels[idx]].mean())

    d_logits_rows = probs.copy()
    d_logits_rows[np.arange(idx.size), labels[idx]] -= 1.0
    d_logits_rows /= idx.size
    dz = np.zeros_like(logits)
    np.add.at(dz, idx, d_logits_rows)

    grads: dict[str, np.ndarray] = {}
    wd = cfg.weight_decay
    use_pos, use_neg, use_poly = cfg.effective_toggles()
    bank: FilterBank = tape["bank"]
    g = tape["g"]
    dg = np.zeros_like(g)

    if cfg.variant == "free_eigenvalues":
        u = bank.spectrum.eigenvectors
        ut_dz = u.T @ dz
        grads["spectrum_params"] = np.einsum("ij,ij->i", ut_dz, tape["b_free"])
        dg = u @ (m.spectrum_params[:, None] * ut_dz)
    else:
        if use_pos:
            gp = np.zeros_like(m.coef_pos)
            for k, f in enumerate(bank.constants):
                gp[k] = np.einsum("ij,ij->j", dz, tape["s_pos"][k])
                dg += f.pos @ (dz * m.coef_pos[k][None, :])
            grads["coef_pos"] = gp
        if use_neg:
            gn = np.zeros_like(m.coef_neg)
            for k, f in enumerate(bank.constants):
                gn[k] = np.einsum("ij,ij->j", dz, tape["s_neg"][k])
                dg += f.neg @ (dz * m.coef_neg[k][None, :])
            grads["coef_neg"] = gn
        if use_poly:
            gb = np.zeros_like(m.poly_coef)
            for p, q in enumerate(tape["q_pows"]):
                gb[p] = np.einsum("ij,ij->j", dz, q)
            grads["poly_coef"] = gb
            pmax = cfg.poly_degree
            acc = dz * m.poly_coef[pmax][None, :]
            for p in range(pmax - 1, -1, -1):
                acc = bank.adjacency @ acc + dz * m.poly_coef[p][None, :]
            dg += acc

    hs = tape["hs"]
    grads["readout"] = hs[-1].T @ dg + wd * m.readout
    dh = dg @ m.readout.T
    for li in range(len(m.mlp) - 1, -1, -1):
        hm = tape["hid_masks"][li]
        if hm is not None:
            dh = dh * hm
        da = dh * _act_grad(tape["pre"][li], cfg.activation)
        grads[f"mlp_{li}"] = hs[li].T @ da + wd * m.mlp[li]
        if li > 0:
            dh = da @ m.mlp[li].T

    loss = ce
    if wd > 0.0:
        for w in m.mlp:
            loss += 0.5 * wd * float((w * w).sum())
        loss += 0.5 * wd * float((m.readout * m.readout).sum())
        if cfg.decay_coefficients:
            for name in ("coef_pos", "coef_neg", "poly_coef", "spectrum_params"):
                t = getattr(m, name)
                if t is not None:
                    loss += 0.5 * wd * float((t * t).sum())
                    if name in grads:
                        grads[name] = grads[name] + wd * t
    return loss, grads


def adam_step(m: Model, grads: dict[str, np.ndarray], lr: float,
              betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8,
              t: int = 1) -> Model:
    """Bias-corrected Adam update applied in place to every parameter."""
    if t < 1:
        raise ModelError(f"step index must be >= 1, got {t}")
    b1, b2 = betas
    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            raise ModelError(f"non-finite gradient for {name!r}")
        mom = m._adam_m.get(name)
        vel = m._adam_v.get(name)
        if mom is None:
            mom = np.zeros_like(grad)
            vel = np.zeros_like(grad)
        mom = b1 * mom + (1.0 - b1) * grad
        vel = b2 * vel + (1.0 - b2) * grad * grad
        m._adam_m[name] = mom
        m._adam_v[name] = vel
        m_hat = mom / (1.0 - b1 ** t)
        v_hat = vel / (1.0 - b2 ** t)
        params = m.parameters()
        m.set_parameter(name, params[name] - lr * m_hat / (np.sqrt(v_hat) + eps))
    return m


def _accuracy(logits: np.ndarray, labels: np.ndarray, mask) -> float:
    idx = _mask_indices(mask, logits.shape[0])
    pred = np.argmax(logits[idx], axis=1)  # ties resolve to the lowest class
    return float((pred == labels[idx]).mean())


def evaluate(m: Model, bank: FilterBank, ds: Dataset, mask) -> float:
    """Accuracy of argmax predictions over the masked nodes."""
    logits = forward(m, bank, ds.features, train_mode=False)
    return _accuracy(logits, ds.labels, mask)


def free_eigenvalues_forward(theta: np.ndarray, spectrum: Spectrum, x: np.ndarray,
                             mlp_weights: list[np.ndarray], readout: np.ndarray,
                             activation: str = "relu") -> np.ndarray:
    """Logits from a directly parameterized eigenspectrum filter."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (spectrum.source_dim,):
        raise ModelError(f"theta must have length {spectrum.source_dim}")
    h = np.asarray(x, dtype=np.float64)
    for w in mlp_weights:
        h = _act(h @ w, activation)
    g = h @ readout
    u = spectrum.eigenvectors
    return u @ (theta[:, None] * (u.T @ g))


@dataclass(frozen=True)
class TrainReport:
    """Per-epoch metrics and the test accuracy at the best-validation epoch."""

    train_loss: list[float]
    val_accuracy: list[float]
    best_epoch: int
    test_accuracy: float
    epoch_seconds: list[float]
    seed: int

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "epochs": len(self.train_loss),
            "best_epoch": self.best_epoch,
            "test_accuracy": self.test_accuracy,
            "train_loss": self.train_loss,
            "val_accuracy": self.val_accuracy,
            "epoch_seconds": self.epoch_seconds,
        }


def build_bank_for_config(cfg: ModelConfig, ds: Dataset) -> FilterBank:
    """One-time precomputation: spectrum, partition, and filter bank."""
    adj = normalized_adjacency_sparse(ds.graph)
    spec = eigendecompose(normalized_adjacency(ds.graph))
    use_pos, use_neg, _ = cfg.effective_toggles()
    need_constants = cfg.variant == "piecewise" and (use_pos or use_neg) and cfg.num_intervals >= 1
    if need_constants:
        part = identify_significant_gaps(spec, cfg.window_size, cfg.num_intervals)
        return build_filter_bank(spec, part.boundaries, adj, cfg.poly_degree,
                                 budget=cfg.sparsify_budget)
    return FilterBank(constants=[], poly_degree=cfg.poly_degree, adjacency=adj,
                      spectrum=spec, boundaries=np.array([0, ds.graph.n]))


def train_model(cfg: ModelConfig, ds: Dataset, split: SplitMask,
                bank: FilterBank | None = None) -> tuple[Model, FilterBank, TrainReport]:
    """Full-batch training loop; returns the best-validation model."""
    if ds.graph.n != split.n:
        raise ModelError("split size does not match the graph")
    if bank is None:
        bank = build_bank_for_config(cfg, ds)
    rng = np.random.default_rng(cfg.seed)
    model = Model.init(cfg, ds.features.shape[1], ds.num_classes, bank, rng)

    losses: list[float] = []
    val_accs: list[float] = []
    secs: list[float] = []
    best_val = -1.0
    best_epoch = -1
    best_test = 0.0
    best_snap = model.snapshot()
    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        try:
            logits = forward(model, bank, ds.features, train_mode=True, rng=rng)
            loss, grads = loss_and_grads(model, logits, ds.labels, split.train)
            adam_step(model, grads, lr=cfg.learning_rate, t=epoch)
        except ModelError as exc:
            raise ModelError(f"epoch {epoch}: {exc}") from exc
        eval_logits = forward(model, bank, ds.features, train_mode=False)
        val_acc = _accuracy(eval_logits, ds.labels, split.val)
        test_acc = _accuracy(eval_logits, ds.labels, split.test)
        losses.append(loss)
        val_accs.append(val_acc)
        secs.append(time.perf_counter() - t0)
        if val_acc > best_val:  # ties keep the earlier epoch
            best_val = val_acc
            best_epoch = epoch
            best_test = test_acc
            best_snap = model.snapshot()
    model.restore(best_snap)
    report = TrainReport(
        train_loss=losses,
        val_accuracy=val_accs,
        best_epoch=best_epoch,
        test_accuracy=best_test,
        epoch_seconds=secs,
        seed=cfg.seed,
    )
    return model, bank, report


def train(cfg: ModelConfig, ds: Dataset, split: SplitMask) -> TrainReport:
    """Train and report; see train_model for the model itself."""
    return train_model(cfg, ds, split)[2]


def mean_ci95(values) -> tuple[float, float]:
    """Sample mean and Student-t 95% confidence half-width."""
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, 0.0
    sem = arr.std(ddof=1) / np.sqrt(arr.size)
    half = float(scipy.stats.t.ppf(0.975, arr.size - 1) * sem)
    return mean, half


ABLATION_COMBOS = (
    (False, False, True),
    (False, True, False),
    (True, False, False),
    (True, True, False),
    (True, True, True),
)


def ablate(cfg: ModelConfig, ds: Dataset, splits: list[SplitMask],
           combos=ABLATION_COMBOS) -> list[dict]:
    """Mean and 95% CI of test accuracy per filter-component combination."""
    if len(splits) < 2:
        raise ModelError("ablation needs at least 2 splits")
    rows = []
    for use_pos, use_neg, use_poly in combos:
        accs = []
        for i, split in enumerate(splits):
            run_cfg = replace(cfg, variant="piecewise", use_pos=use_pos,
                              use_neg=use_neg, use_poly=use_poly, seed=cfg.seed + i)
            accs.append(train(run_cfg, ds, split).test_accuracy)
        mean, half = mean_ci95(accs)
        rows.append({
            "use_pos": use_pos,
            "use_neg": use_neg,
            "use_poly": use_poly,
            "accuracies": accs,
            "mean": mean,
            "ci95": half,
        })
    return rows


def save_checkpoint(m: Model, path) -> None:
    """Flat binary checkpoint: magic, JSON header, concatenated float64 data."""
    tensors = []
    payload = bytearray()
    for name, tensor in sorted(m.parameters().items()):
        buf = np.ascontiguousarray(tensor, dtype=np.float64).tobytes()
        tensors.append({
            "name": name,
            "shape": list(tensor.shape),
            "offset": len(payload),
            "nbytes": len(buf),
        })
        payload.extend(buf)
    header = json.dumps({"config": m.cfg.to_json(), "tensors": tensors,
                         "dtype": "float64"}).encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(len(header).to_bytes(8, "little"))
        fh.write(header)
        fh.write(bytes(payload))


def load_checkpoint(path) -> tuple[ModelConfig, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ModelError(f"{path}: not a checkpoint file")
        header_len = int.from_bytes(fh.read(8), "little")
        header = json.loads(fh.read(header_len))
        payload = fh.read()
    cfg = ModelConfig.from_json(header["config"])
    params = {}
    for spec in header["tensors"]:
        raw = payload[spec["offset"] : spec["offset"] + spec["nbytes"]]
        params[spec["name"]] = np.frombuffer(raw, dtype=np.float64).reshape(spec["shape"]).copy()
    return cfg, params


def restore_model(cfg: ModelConfig, params: dict[str, np.ndarray], bank: FilterBank,
                  feature_dim: int, num_classes: int) -> Model:
    """Rebuild a Model around a bank and load checkpointed parameters."""
    model = Model.init(cfg, feature_dim, num_classes, bank, np.random.default_rng(cfg.seed))
    for name, value in params.items():
        model.set_parameter(name, value)
    return model
