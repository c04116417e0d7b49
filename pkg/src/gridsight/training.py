"""Dataset splitting, the training loop, checkpoint selection, ensembling,
and evaluation metrics."""

import json
import math
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt_io
from . import nn, optim
from .manifest import SampleRecord

DEFAULT_RATIOS = (0.8, 0.1, 0.1)


@dataclass
class TrainConfig:
    batch_size: int = 8
    alpha0: float = 1e-3
    tau_max: int = 30
    tau_start: int = 10
    weight_decay: float = 1e-4
    seed: int = 0
    epochs: int | None = None  # defaults to tau_max
    risk_class: int | None = 2
    risk_multiplier: float = 1.0
    checkpoint_dir: str = "checkpoints"

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch size must be at least 1")

    @property
    def total_epochs(self) -> int:
        return self.epochs if self.epochs is not None else self.tau_max

    def schedule(self) -> optim.LrSchedule:
        return optim.LrSchedule(alpha0=self.alpha0, tau_start=self.tau_start, tau_max=self.tau_max)


# Table-style hyperparameter presets; names bind historical tuning rows to
# the from-scratch SmallNet rather than to any particular architecture.
PRESETS = {
    "alexnet-like": dict(batch_size=64, alpha0=2e-5, tau_max=70, tau_start=30, weight_decay=1e-4),
    "resnet-like": dict(batch_size=96, alpha0=8e-4, tau_max=150, tau_start=50, weight_decay=5e-4),
    "vgg-like": dict(batch_size=32, alpha0=1e-4, tau_max=11, tau_start=5, weight_decay=1e-3),
    "smallnet": dict(batch_size=8, alpha0=1e-3, tau_max=30, tau_start=10, weight_decay=1e-4),
}


def preset_config(name: str, **overrides) -> TrainConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    fields = dict(PRESETS[name])
    fields.update(overrides)
    return TrainConfig(**fields)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_accuracy: float
    dev_accuracy: float
    lr: float
    checkpoint_path: str = ""

    def to_json(self) -> str:
        return json.dumps(asdict(self), separators=(",", ":"))


# ---------------------------------------------------------------------------
# splitting


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_dataset(records: list[SampleRecord], ratios=DEFAULT_RATIOS, seed: int = 0) -> list[SampleRecord]:
    """Assign stratified train/dev/test splits in place and return the records.

    Dev and test sizes per class are the half-up-rounded ratio shares, the
    remainder trains.  Flip mirrors must be generated after splitting so a
    mirror pair can never straddle splits; this function refuses manifests
    that already contain mirrors.
    """
    if any(r.flipped for r in records):
        raise ValueError("split before flip augmentation; manifest already has mirrors")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {ratios}")
    rng = np.random.default_rng(seed)
    by_class: dict[int, list[SampleRecord]] = {}
    for rec in records:
        by_class.setdefault(rec.label, []).append(rec)
    for label, members in sorted(by_class.items()):
        if len(members) < 3:
            raise ValueError(
                f"class {label} has only {len(members)} samples and cannot be "
                "stratified; merge it with a neighbor or gather more data"
            )
        members = sorted(members, key=lambda r: r.id)
        order = rng.permutation(len(members))
        n = len(members)
        n_dev = _round_half_up(n * ratios[1])
        n_test = _round_half_up(n * ratios[2])
        for rank, idx in enumerate(order):
            if rank < n_dev:
                members[idx].split = "dev"
            elif rank < n_dev + n_test:
                members[idx].split = "test"
            else:
                members[idx].split = "train"
    return records


# ---------------------------------------------------------------------------
# training loop


class Predictor:
    """A spec + parameter set exposed with the small interface the ensemble
    and evaluation code need."""

    def __init__(self, spec: nn.NetworkSpec, params: dict):
        self.spec = spec
        self.params = params

    def scores(self, stacks: np.ndarray) -> np.ndarray:
        stacks = np.asarray(stacks)
        if stacks.ndim == 3:
            stacks = stacks[None]
        out, _ = nn.forward(self.spec, self.params, stacks, mode="eval")
        return out

    def probabilities(self, stacks: np.ndarray) -> np.ndarray:
        return nn.softmax(self.scores(stacks))

    def predict(self, stacks: np.ndarray) -> np.ndarray:
        return self.scores(stacks).argmax(axis=1)


def _accuracy(predictor: Predictor, X: np.ndarray, y: np.ndarray, batch_size: int) -> float:
    hits = 0
    for start in range(0, len(X), batch_size):
        chunk = X[start : start + batch_size]
        hits += int((predictor.predict(chunk) == y[start : start + batch_size]).sum())
    return hits / max(len(X), 1)


def train_arrays(
    X_train: np.ndarray,
    y_train: np.ndarray,
    X_dev: np.ndarray,
    y_dev: np.ndarray,
    config: TrainConfig,
    spec: nn.NetworkSpec | None = None,
    weights: np.ndarray | None = None,
    checkpoint_dir=None,
    metrics_path=None,
) -> tuple[list[EpochRecord], dict]:
    """Seeded full training run over in-memory stacks.

    Per epoch: shuffle, batch, forward/loss/backward/adam with the scheduled
    rate, then a deterministic dev evaluation and an optional checkpoint.
    Returns the epoch records and the final parameters.
    """
    spec = spec or nn.smallnet_spec()
    X_train = np.asarray(X_train, dtype=np.float32)
    X_dev = np.asarray(X_dev, dtype=np.float32)
    y_train = np.asarray(y_train, dtype=int)
    y_dev = np.asarray(y_dev, dtype=int)
    if weights is None:
        counts = np.bincount(y_train, minlength=nn.N_CLASSES)
        weights = optim.class_weights(
            np.maximum(counts, 1), config.risk_class, config.risk_multiplier
        )
    weights = np.asarray(weights, dtype=np.float64)

    params = nn.init_params(spec, seed=config.seed)
    state = optim.AdamState.fresh(params)
    adam_cfg = optim.AdamConfig(weight_decay=config.weight_decay)
    schedule = config.schedule()
    shuffle_rng = np.random.default_rng(config.seed + 1)
    predictor = Predictor(spec, params)

    if checkpoint_dir is not None:
        checkpoint_dir = Path(checkpoint_dir)
        checkpoint_dir.mkdir(parents=True, exist_ok=True)
    metrics_fh = open(metrics_path, "w", encoding="utf-8") if metrics_path else None

    records: list[EpochRecord] = []
    try:
        for epoch in range(config.total_epochs):
            lr = optim.lr_at(schedule, epoch)
            order = shuffle_rng.permutation(len(X_train))
            epoch_loss = 0.0
            epoch_hits = 0
            for batch_idx, start in enumerate(range(0, len(order), config.batch_size)):
                sel = order[start : start + config.batch_size]
                xb, yb = X_train[sel], y_train[sel]
                drop_seed = (config.seed * 1_000_003 + epoch * 10_007 + batch_idx) % (2**63)
                scores, caches = nn.forward(spec, params, xb, mode="train", rng=drop_seed)
                if not np.all(np.isfinite(scores)):
                    raise FloatingPointError(
                        f"non-finite scores in epoch {epoch}, batch {batch_idx}, sample ids {sel.tolist()}"
                    )
                loss, dscores = nn.loss_and_grad(scores, yb, weights)
                if not math.isfinite(loss):
                    raise FloatingPointError(
                        f"non-finite loss in epoch {epoch}, batch {batch_idx}, sample ids {sel.tolist()}"
                    )
                grads, _ = nn.backward(spec, params, caches, dscores)
                optim.adam_step(params, grads, state, adam_cfg, lr, spec=spec)
                epoch_loss += loss * len(sel)
                epoch_hits += int((scores.argmax(axis=1) == yb).sum())

            dev_acc = _accuracy(predictor, X_dev, y_dev, config.batch_size) if len(X_dev) else 0.0
            record = EpochRecord(
                epoch=epoch,
                train_loss=epoch_loss / max(len(order), 1),
                train_accuracy=epoch_hits / max(len(order), 1),
                dev_accuracy=dev_acc,
                lr=lr,
            )
            if checkpoint_dir is not None:
                path = checkpoint_dir / f"epoch{epoch:04d}.ckpt"
                ckpt_io.save_checkpoint(
                    path, spec.spec_hash(), params, opt_state=state, epoch=epoch, dev_accuracy=dev_acc
                )
                # run directories stay relocatable and logs byte-reproducible
                record.checkpoint_path = f"{checkpoint_dir.name}/{path.name}"
            records.append(record)
            if metrics_fh:
                metrics_fh.write(record.to_json() + "\n")
                metrics_fh.flush()
    finally:
        if metrics_fh:
            metrics_fh.close()
    return records, params


# ---------------------------------------------------------------------------
# checkpoint selection and ensembling


def select_top_k(records: list[EpochRecord], k: int = 10, min_gap: int = 5) -> list[EpochRecord]:
    """Greedy best-dev selection with a minimum epoch separation.

    Sort by dev accuracy descending (earlier epoch wins ties); accept a
    record only when its epoch is at least min_gap away from every accepted
    epoch; stop at k or exhaustion, warning if fewer than k were available.
    """
    if not records:
        raise ValueError("no epoch records to select from")
    ranked = sorted(records, key=lambda r: (-r.dev_accuracy, r.epoch))
    chosen: list[EpochRecord] = []
    for rec in ranked:
        if len(chosen) >= k:
            break
        if all(abs(rec.epoch - c.epoch) >= min_gap for c in chosen):
            chosen.append(rec)
    if len(chosen) < k:
        warnings.warn(
            f"only {len(chosen)} of {k} requested checkpoints satisfy the {min_gap}-epoch gap",
            stacklevel=2,
        )
    return chosen


def vote_tally(votes) -> int:
    """Plurality with ties broken toward the highest-risk class (2 > 1 > 0)."""
    counts = np.bincount(np.asarray(votes, dtype=int), minlength=nn.N_CLASSES)
    best = counts.max()
    return int(max(c for c in range(nn.N_CLASSES) if counts[c] == best))


def ensemble_vote(models, stack: np.ndarray) -> int:
    """Each model votes its argmax class for one stack; plurality wins."""
    if not models:
        raise ValueError("need at least one model to vote")
    votes = [int(m.predict(stack[None] if stack.ndim == 3 else stack)[0]) for m in models]
    return vote_tally(votes)


def evaluate(models, stacks: np.ndarray, labels: np.ndarray, records: list[SampleRecord] | None = None, batch_size: int = 16):
    """Confusion matrix, per-class accuracy, and the flagged high-risk list.

    `models` may be a single Predictor or a list; predictions come from the
    ensemble vote and confidences from the mean softmax across models.
    """
    if not isinstance(models, (list, tuple)):
        models = [models]
    stacks = np.asarray(stacks)
    labels = np.asarray(labels, dtype=int)
    n = len(stacks)

    probs = np.zeros((n, nn.N_CLASSES), dtype=np.float64)
    votes = np.zeros((len(models), n), dtype=int)
    for mi, model in enumerate(models):
        for start in range(0, n, batch_size):
            chunk = stacks[start : start + batch_size]
            p = model.probabilities(chunk)
            probs[start : start + batch_size] += p
            votes[mi, start : start + batch_size] = p.argmax(axis=1)
    probs /= len(models)

    predicted = np.array([vote_tally(votes[:, i]) for i in range(n)], dtype=int)
    confusion = np.zeros((nn.N_CLASSES, nn.N_CLASSES), dtype=int)
    for t, p in zip(labels, predicted):
        confusion[t, p] += 1
    row_sums = confusion.sum(axis=1)
    per_class = [
        float(confusion[c, c] / row_sums[c]) if row_sums[c] else 0.0 for c in range(nn.N_CLASSES)
    ]
    overall = float(np.trace(confusion) / n) if n else 0.0

    flagged = []
    for i in np.nonzero(predicted == nn.N_CLASSES - 1)[0]:
        entry = {
            "id": records[i].id if records else str(i),
            "lat": records[i].lat if records else 0.0,
            "lon": records[i].lon if records else 0.0,
            "path": records[i].path if records else "",
            "predicted": int(predicted[i]),
            "label": int(labels[i]),
            "confidences": [float(v) for v in probs[i]],
            "votes": [int(v) for v in votes[:, i]],
        }
        flagged.append(entry)
    flagged.sort(key=lambda e: (-e["confidences"][nn.N_CLASSES - 1], e["id"]))

    return {
        "confusion": confusion.tolist(),
        "per_class_accuracy": per_class,
        "overall": overall,
        "flagged": flagged,
    }


def load_predictor(path, spec: nn.NetworkSpec | None = None) -> Predictor:
    spec = spec or nn.smallnet_spec()
    data = ckpt_io.load_checkpoint(path)
    if data["spec_hash"] != spec.spec_hash():
        raise ValueError(f"{path}: checkpoint does not match the network spec")
    return Predictor(spec, data["params"])
