"""Training: configuration, the model bundle, the update loop, grad checks.

The objective combines the threshold-ranking losses: well-defined golds
contribute L1 + L2; Vague golds contribute the speculative L3 (weighted by
the ramped w), plus the L4 penalty in the ``metre_pnt`` ablation; the
``metre_no_cs`` ablation forces the confusion set empty; ``baseline``
trains a single-label cross-entropy head over relations plus Vague.
Everything is deterministic given the seed.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import losses
from .classify import ScoredPrediction, baseline_score_and_infer, infer
from .data import EventPairInstance
from .encoder import (
    Featurizer,
    FeaturizerConfig,
    PairEncoder,
    featurize_batch,
    insert_markers,
    lookup_precomputed,
)
from .errors import ConfigError, DivergenceError, InputError
from .metrics import micro_f1
from .nn import MLP, SGD
from .schema import VAGUE, RelationSchema

MODES = ("metre", "metre_no_cs", "metre_pnt", "baseline")


@dataclass
class TrainConfig:
    """Hyperparameters for one training run."""

    mode: str = "metre"
    alpha: float = 1e-3
    w_bar: float = 1.0
    learning_rate: float = 0.05
    momentum: float = 0.9
    epochs: int = 20
    batch_size: int = 32
    seed: int = 0
    d_e: int = 64
    d_h: int = 64
    hidden: int = 64
    n_buckets: int = 4096
    window_radius: int = 5
    pooling: str = "window"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.alpha < 0 or self.w_bar < 0:
            raise ConfigError("alpha and w_bar must be >= 0")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> "TrainConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_file(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")


MODEL_FORMAT = "temprel-model"
MODEL_VERSION = 1


class Model:
    """Schema, encoder, and the three heads, bundled for save/load.

    ``encoder`` is None when the model was trained on precomputed pair
    vectors; such a model needs the same vector table again at prediction
    time.
    """

    def __init__(
        self,
        schema: RelationSchema,
        cfg: TrainConfig,
        rng: np.random.Generator,
        precomputed_width: int | None = None,
    ):
        self.schema = schema
        self.mode = cfg.mode
        self.dims = {
            "d_e": cfg.d_e,
            "d_h": cfg.d_h,
            "hidden": cfg.hidden,
            "n_buckets": cfg.n_buckets,
            "window_radius": cfg.window_radius,
            "pooling": cfg.pooling,
        }
        if precomputed_width is None:
            fz = Featurizer(
                FeaturizerConfig(
                    n_buckets=cfg.n_buckets,
                    d_e=cfg.d_e,
                    window_radius=cfg.window_radius,
                    pooling=cfg.pooling,
                ),
                rng,
            )
            self.encoder = PairEncoder(fz, MLP([2 * cfg.d_e, cfg.hidden, cfg.d_h], rng))
            d_h = cfg.d_h
        else:
            self.encoder = None
            d_h = precomputed_width
            self.dims["d_h"] = d_h
        num_rel = schema.num_relations
        self.mlp2 = MLP([d_h, cfg.hidden, num_rel], rng)
        self.mlp3 = MLP([d_h, cfg.hidden, 1], rng)
        self.mlp_b = MLP([d_h, cfg.hidden, num_rel + 1], rng)

    @property
    def uses_precomputed(self) -> bool:
        return self.encoder is None

    def named_tensors(self) -> list[tuple[str, np.ndarray]]:
        out = []
        if self.encoder is not None:
            out.append(("embedding", self.encoder.featurizer.embedding))
            for i, lin in enumerate(self.encoder.mlp1.layers):
                out.append((f"mlp1.{i}.W", lin.W))
                out.append((f"mlp1.{i}.b", lin.b))
        for name, mlp in (("mlp2", self.mlp2), ("mlp3", self.mlp3), ("mlp_b", self.mlp_b)):
            for i, lin in enumerate(mlp.layers):
                out.append((f"{name}.{i}.W", lin.W))
                out.append((f"{name}.{i}.b", lin.b))
        return out

    def trainable_params(self) -> list[np.ndarray]:
        """Parameters updated for this model's mode, in a fixed order."""
        out = [] if self.encoder is None else self.encoder.params()
        if self.mode == "baseline":
            out = out + self.mlp_b.params()
        else:
            out = out + self.mlp2.params() + self.mlp3.params()
        return out

    def snapshot(self) -> list[np.ndarray]:
        return [p.copy() for p in self.trainable_params()]

    def restore(self, snap: list[np.ndarray]) -> None:
        for p, s in zip(self.trainable_params(), snap):
            np.copyto(p, s)

    # -- persistence ------------------------------------------------------

    def save(self, path: str | Path) -> None:
        tensors = self.named_tensors()
        header = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "mode": self.mode,
            "schema": self.schema.to_dict(),
            "dims": self.dims,
            "uses_precomputed": self.uses_precomputed,
            "tensors": [[name, list(t.shape)] for name, t in tensors],
        }
        with open(path, "wb") as fh:
            fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
            fh.write(b"\n")
            for _, t in tensors:
                fh.write(np.ascontiguousarray(t, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "Model":
        with open(path, "rb") as fh:
            header_line = fh.readline()
            try:
                header = json.loads(header_line.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                raise ConfigError(f"{path}: not a model file: {exc}") from exc
            if header.get("format") != MODEL_FORMAT:
                raise ConfigError(f"{path}: not a {MODEL_FORMAT} file")
            if header.get("version") != MODEL_VERSION:
                raise ConfigError(f"{path}: unsupported model version {header.get('version')}")
            schema = RelationSchema.from_dict(header["schema"])
            dims = header["dims"]
            cfg = TrainConfig(
                mode=header["mode"],
                d_e=dims["d_e"],
                d_h=dims["d_h"],
                hidden=dims["hidden"],
                n_buckets=dims["n_buckets"],
                window_radius=dims["window_radius"],
                pooling=dims["pooling"],
            )
            width = dims["d_h"] if header["uses_precomputed"] else None
            model = cls(schema, cfg, np.random.default_rng(0), precomputed_width=width)
            tensors = dict(model.named_tensors())
            for name, shape in header["tensors"]:
                if name not in tensors:
                    raise ConfigError(f"{path}: unexpected tensor {name!r}")
                count = int(np.prod(shape, dtype=np.int64)) if shape else 1
                raw = fh.read(count * 8)
                if len(raw) != count * 8:
                    raise ConfigError(f"{path}: truncated tensor {name!r}")
                arr = np.frombuffer(raw, dtype="<f8").reshape(shape)
                if tensors[name].shape != arr.shape:
                    raise ConfigError(f"{path}: tensor {name!r} has shape {arr.shape}")
                np.copyto(tensors[name], arr)
        return model

    # -- forward paths ----------------------------------------------------

    def representations(
        self,
        insts: Sequence[EventPairInstance],
        precomputed: dict[str, np.ndarray] | None = None,
    ) -> np.ndarray:
        if self.uses_precomputed:
            if precomputed is None:
                raise ConfigError(
                    "model was trained on precomputed vectors; pass the vector table"
                )
            return lookup_precomputed(precomputed, [i.id for i in insts])
        fb = featurize_batch(self.encoder.featurizer, [insert_markers(i) for i in insts])
        return self.encoder.forward(fb)

    def predict(
        self,
        insts: Sequence[EventPairInstance],
        precomputed: dict[str, np.ndarray] | None = None,
    ) -> list[ScoredPrediction]:
        """Threshold-rule predictions (modes other than baseline)."""
        h = self.representations(insts, precomputed)
        scores = self.mlp2.forward(h)
        thresholds = self.mlp3.forward(h)[:, 0]
        return [
            infer(scores[i], float(thresholds[i]), self.schema) for i in range(len(insts))
        ]

    def predict_labels(
        self,
        insts: Sequence[EventPairInstance],
        precomputed: dict[str, np.ndarray] | None = None,
    ) -> list[str]:
        """Final label per instance, honouring the model's mode."""
        if self.mode == "baseline":
            h = self.representations(insts, precomputed)
            return [
                baseline_score_and_infer(h[i], self.mlp_b, self.schema)
                for i in range(len(insts))
            ]
        return [p.decision for p in self.predict(insts, precomputed)]


@dataclass
class TrainState:
    """Mutable loop state: the model parameters and the update counter."""

    model: Model
    step: int = 0


@dataclass
class EpochLog:
    epoch: int
    mean_loss: float
    dev_micro_f1: float | None
    w: float

    def to_record(self) -> dict:
        return {
            "epoch": self.epoch,
            "mean_loss": self.mean_loss,
            "dev_micro_f1": self.dev_micro_f1,
            "w": self.w,
        }


def _gold_indices(
    insts: Sequence[EventPairInstance], schema: RelationSchema
) -> np.ndarray:
    """Gold label indices; Vague encodes as -1."""
    idx = np.empty(len(insts), dtype=np.int64)
    for i, inst in enumerate(insts):
        if inst.gold is None:
            raise InputError(f"{inst.id}: training instance has no gold label")
        idx[i] = -1 if inst.gold == VAGUE else schema.index_of(inst.gold)
    return idx


def _metre_loss_and_grads(
    scores: np.ndarray,
    thresholds: np.ndarray,
    gold_idx: np.ndarray,
    mode: str,
    w: float,
    schema: RelationSchema,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Summed loss over a batch plus gradients w.r.t. scores and thresholds."""
    d_scores = np.zeros_like(scores)
    d_thresholds = np.zeros_like(thresholds)
    total = 0.0

    well = gold_idx >= 0
    if well.any():
        loss, ds, dt = losses.batch_well_defined(
            scores[well], thresholds[well], gold_idx[well]
        )
        total += loss
        d_scores[well] = ds
        d_thresholds[well] = dt

    vague = ~well
    if vague.any() and mode != "metre_no_cs":
        s_v, t_v = scores[vague], thresholds[vague]
        members, filtered = losses.confusion_masks(s_v, t_v, schema)
        loss3, ds, dt = losses.batch_vague(s_v, t_v, filtered, w)
        total += loss3
        if mode == "metre_pnt":
            loss4, ds4, dt4 = losses.batch_penalty(s_v, t_v, ~members)
            total += loss4
            ds = ds + ds4
            dt = dt + dt4
        d_scores[vague] = ds
        d_thresholds[vague] = dt

    return total, d_scores, d_thresholds


def total_loss(
    batch: Sequence[EventPairInstance],
    state: TrainState,
    cfg: TrainConfig,
    precomputed: dict[str, np.ndarray] | None = None,
) -> float:
    """Mean training loss of a batch at the current step (forward only)."""
    if not batch:
        raise InputError("empty batch")
    model = state.model
    h = model.representations(batch, precomputed)
    gold_idx = _gold_indices(batch, model.schema)
    if cfg.mode == "baseline":
        logits = model.mlp_b.forward(h)
        tilde = np.where(gold_idx >= 0, gold_idx, model.schema.num_relations)
        loss, _ = losses.batch_cross_entropy(logits, tilde)
        return loss / len(batch)
    scores = model.mlp2.forward(h)
    thresholds = model.mlp3.forward(h)[:, 0]
    w = losses.weight_at(state.step, cfg.alpha, cfg.w_bar)
    loss, _, _ = _metre_loss_and_grads(
        scores, thresholds, gold_idx, cfg.mode, w, model.schema
    )
    return loss / len(batch)


def _batch_forward_backward(
    model: Model,
    cfg: TrainConfig,
    h: np.ndarray,
    enc_cache,
    gold_idx: np.ndarray,
    w: float,
) -> tuple[float, list[np.ndarray]]:
    """One batch: mean loss and flat gradient list matching trainable_params."""
    n = h.shape[0]
    if cfg.mode == "baseline":
        logits, cache_b = model.mlp_b.forward_cached(h)
        tilde = np.where(gold_idx >= 0, gold_idx, model.schema.num_relations)
        loss, d_logits = losses.batch_cross_entropy(logits, tilde)
        grads_b, grad_h = model.mlp_b.backward(cache_b, d_logits / n)
        head_grads = model.mlp_b.flat_grads(grads_b)
    else:
        scores, cache2 = model.mlp2.forward_cached(h)
        thr, cache3 = model.mlp3.forward_cached(h)
        loss, d_scores, d_thr = _metre_loss_and_grads(
            scores, thr[:, 0], gold_idx, cfg.mode, w, model.schema
        )
        grads2, grad_h2 = model.mlp2.backward(cache2, d_scores / n)
        grads3, grad_h3 = model.mlp3.backward(cache3, d_thr[:, None] / n)
        grad_h = grad_h2 + grad_h3
        head_grads = model.mlp2.flat_grads(grads2) + model.mlp3.flat_grads(grads3)

    if model.encoder is None:
        return loss / n, head_grads
    dE, grads1 = model.encoder.backward(enc_cache, grad_h)
    return loss / n, [dE] + model.encoder.mlp1.flat_grads(grads1) + head_grads


def train(
    train_insts: Sequence[EventPairInstance],
    dev_insts: Sequence[EventPairInstance],
    cfg: TrainConfig,
    schema: RelationSchema,
    precomputed: dict[str, np.ndarray] | None = None,
) -> tuple[Model, list[EpochLog]]:
    """Mini-batch gradient descent on the mode's objective.

    Symmetry enhancement, if wanted, must already have been applied to
    ``train_insts`` (never to ``dev_insts``).  Returns the parameters of
    the best dev epoch (ties keep the earliest) and the per-epoch log.
    """
    if not train_insts:
        raise InputError("empty training set")
    for inst in train_insts:
        inst.validate_labels(schema)
    for inst in dev_insts:
        inst.validate_labels(schema)

    rng = np.random.default_rng(cfg.seed)
    width = None
    if precomputed is not None:
        widths = {v.shape[0] for v in precomputed.values()}
        if len(widths) != 1:
            raise ConfigError("precomputed vectors must share one width")
        width = widths.pop()
    model = Model(schema, cfg, rng, precomputed_width=width)
    state = TrainState(model=model, step=0)

    gold_idx = _gold_indices(train_insts, schema)
    if model.uses_precomputed:
        h_train = lookup_precomputed(precomputed, [i.id for i in train_insts])
        fb_train = None
    else:
        fb_train = featurize_batch(
            model.encoder.featurizer, [insert_markers(i) for i in train_insts]
        )
        h_train = None

    opt = SGD(model.trainable_params(), lr=cfg.learning_rate, momentum=cfg.momentum)
    dev_golds = [i.gold for i in dev_insts]

    logs: list[EpochLog] = []
    best_f1 = -1.0
    best_snap = model.snapshot()
    n = len(train_insts)

    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        loss_total = 0.0
        for start in range(0, n, cfg.batch_size):
            rows = perm[start : start + cfg.batch_size]
            w = losses.weight_at(state.step, cfg.alpha, cfg.w_bar)
            if model.uses_precomputed:
                h, enc_cache = h_train[rows], None
            else:
                h, enc_cache = model.encoder.forward_cached(fb_train.take(rows))
            mean_loss, grads = _batch_forward_backward(
                model, cfg, h, enc_cache, gold_idx[rows], w
            )
            if not np.isfinite(mean_loss):
                raise DivergenceError(
                    f"non-finite loss {mean_loss} at epoch {epoch}, step {state.step}"
                )
            opt.step(grads)
            state.step += 1
            loss_total += mean_loss * len(rows)

        dev_f1 = None
        if dev_insts:
            dev_f1 = micro_f1(dev_golds, model.predict_labels(dev_insts, precomputed))
            if dev_f1 > best_f1:
                best_f1 = dev_f1
                best_snap = model.snapshot()
        logs.append(
            EpochLog(
                epoch=epoch,
                mean_loss=loss_total / n,
                dev_micro_f1=dev_f1,
                w=losses.weight_at(state.step, cfg.alpha, cfg.w_bar),
            )
        )

    if dev_insts:
        model.restore(best_snap)
    return model, logs


def write_log(logs: Sequence[EpochLog], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in logs:
            fh.write(json.dumps(entry.to_record(), sort_keys=True))
            fh.write("\n")


# ---------------------------------------------------------------------------
# Gradient verification
# ---------------------------------------------------------------------------

GRAD_CHECK_SELECTORS = ("l1l2", "l3", "l4", "baseline", "end_to_end")


def _rel_err(a: float, n: float) -> float:
    return abs(a - n) / max(abs(a), abs(n), 1e-6)


def _small_config(seed: int) -> TrainConfig:
    return TrainConfig(
        seed=seed, d_e=5, d_h=6, hidden=7, n_buckets=24, window_radius=2
    )


def grad_check(
    selector: str,
    schema: RelationSchema,
    seed: int = 0,
    epsilon: float = 1e-5,
    trials: int = 10,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Each trial draws a fresh small random configuration.  Confusion sets
    are built once from the unperturbed scores and then held fixed, so the
    checked function stays smooth around the base point.
    """
    if selector not in GRAD_CHECK_SELECTORS:
        raise InputError(f"unknown gradient check {selector!r}")
    worst = 0.0
    for trial in range(trials):
        rng = np.random.default_rng(seed * 1000 + trial)
        cfg = _small_config(seed)
        model = Model(schema, cfg, rng)
        if selector == "end_to_end":
            worst = max(worst, _check_end_to_end(model, schema, rng, epsilon))
        else:
            worst = max(worst, _check_heads(model, schema, rng, epsilon, selector))
    return worst


def _check_heads(
    model: Model,
    schema: RelationSchema,
    rng: np.random.Generator,
    eps: float,
    selector: str,
) -> float:
    h = rng.normal(scale=0.8, size=model.mlp2.d_in)
    gold = schema.relations[int(rng.integers(schema.num_relations))]
    w = float(rng.uniform(0.2, 1.0))

    base_scores = model.mlp2.forward(h[None, :])[0]
    base_thr = float(model.mlp3.forward(h[None, :])[0, 0])
    cs = losses.build_confusion_set(base_scores, base_thr, schema)
    cs_t_mask = np.array([[r in cs.filtered for r in schema.relations]])
    outside_mask = np.array([[r not in cs.members for r in schema.relations]])
    gold_row = np.array([schema.index_of(gold)])

    def forward() -> float:
        scores = model.mlp2.forward(h[None, :])[0]
        thr = float(model.mlp3.forward(h[None, :])[0, 0])
        if selector == "l1l2":
            l1, l2 = losses.loss_well_defined(scores, thr, gold, schema)
            return l1 + l2
        if selector == "l3":
            return losses.loss_vague(scores, thr, cs, w, schema)
        if selector == "l4":
            return losses.loss_penalty_ablation(scores, thr, cs, schema)
        probs_logits = model.mlp_b.forward(h[None, :])
        tilde = np.array([schema.index_of(gold)])
        loss, _ = losses.batch_cross_entropy(probs_logits, tilde)
        return loss

    # analytic gradients via the batched backward path
    if selector == "baseline":
        logits, cache_b = model.mlp_b.forward_cached(h[None, :])
        _, d_logits = losses.batch_cross_entropy(logits, gold_row)
        grads_b, _ = model.mlp_b.backward(cache_b, d_logits)
        params = model.mlp_b.params()
        analytic = model.mlp_b.flat_grads(grads_b)
    else:
        scores, cache2 = model.mlp2.forward_cached(h[None, :])
        thr, cache3 = model.mlp3.forward_cached(h[None, :])
        if selector == "l1l2":
            _, ds, dt = losses.batch_well_defined(scores, thr[:, 0], gold_row)
        elif selector == "l3":
            _, ds, dt = losses.batch_vague(scores, thr[:, 0], cs_t_mask, w)
        else:
            _, ds, dt = losses.batch_penalty(scores, thr[:, 0], outside_mask)
        grads2, _ = model.mlp2.backward(cache2, ds)
        grads3, _ = model.mlp3.backward(cache3, dt[:, None])
        params = model.mlp2.params() + model.mlp3.params()
        analytic = model.mlp2.flat_grads(grads2) + model.mlp3.flat_grads(grads3)

    return _central_difference_worst(params, analytic, forward, eps)


def _check_end_to_end(
    model: Model, schema: RelationSchema, rng: np.random.Generator, eps: float
) -> float:
    vocab = [f"tok{i}" for i in range(30)]
    n_tok = int(rng.integers(6, 12))
    tokens = [vocab[int(rng.integers(len(vocab)))] for _ in range(n_tok)]
    e1 = int(rng.integers(0, n_tok - 2))
    e2 = int(rng.integers(e1 + 1, n_tok))
    inst = EventPairInstance(
        id="gc", tokens=tokens, e1_span=(e1, e1 + 1), e2_span=(e2, e2 + 1),
        gold=schema.relations[int(rng.integers(schema.num_relations))],
    )
    fb = featurize_batch(model.encoder.featurizer, [insert_markers(inst)])
    gold_row = np.array([schema.index_of(inst.gold)])

    def forward() -> float:
        h = model.encoder.forward(fb)
        scores = model.mlp2.forward(h)[0]
        thr = float(model.mlp3.forward(h)[0, 0])
        l1, l2 = losses.loss_well_defined(scores, thr, inst.gold, schema)
        return l1 + l2

    h, enc_cache = model.encoder.forward_cached(fb)
    scores, cache2 = model.mlp2.forward_cached(h)
    thr, cache3 = model.mlp3.forward_cached(h)
    _, ds, dt = losses.batch_well_defined(scores, thr[:, 0], gold_row)
    grads2, gh2 = model.mlp2.backward(cache2, ds)
    grads3, gh3 = model.mlp3.backward(cache3, dt[:, None])
    dE, grads1 = model.encoder.backward(enc_cache, gh2 + gh3)
    params = model.encoder.params() + model.mlp2.params() + model.mlp3.params()
    analytic = (
        [dE]
        + model.encoder.mlp1.flat_grads(grads1)
        + model.mlp2.flat_grads(grads2)
        + model.mlp3.flat_grads(grads3)
    )
    return _central_difference_worst(params, analytic, forward, eps)


def _central_difference_worst(params, analytic, forward, eps: float) -> float:
    worst = 0.0
    for p, g in zip(params, analytic):
        flat_p = p.reshape(-1)
        flat_g = np.asarray(g).reshape(-1)
        for j in range(flat_p.size):
            orig = flat_p[j]
            flat_p[j] = orig + eps
            up = forward()
            flat_p[j] = orig - eps
            down = forward()
            flat_p[j] = orig
            numeric = (up - down) / (2 * eps)
            worst = max(worst, _rel_err(float(flat_g[j]), numeric))
    return worst
