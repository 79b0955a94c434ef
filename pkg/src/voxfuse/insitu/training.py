"""Cooldown-gated training loop and majority-vote segment re-identification."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..segmentation import Inventory, ObjectSegment
from ..volume import MultiVolume
from .graphs import (
    DEFAULT_GRAPH_SIZE,
    eligible_null_voxels,
    sample_null_graph,
    sample_object_graph,
)
from .model import (
    AdamState,
    InSituModel,
    adam_step,
    forward,
    grad,
    init_insitu_model,
    softmax,
)


@dataclass
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    cooldown: int = 10  # improvement-free epochs after the floor is reached
    epoch_cap: int = 500
    accuracy_floor: float = 0.95
    graph_size: int = DEFAULT_GRAPH_SIZE
    null_radius: int = 8


@dataclass
class TrainReport:
    epochs_run: int
    best_accuracy: float
    stopped_reason: str  # cooldown | cap | user
    wall_time: float
    loss_curve: list[float] = field(default_factory=list)
    accuracy_curve: list[float] = field(default_factory=list)

    def __post_init__(self):
        if not 0.0 <= self.best_accuracy <= 1.0:
            raise ValueError("best_accuracy must be in [0, 1]")


def personalized_labels(inv: Inventory) -> list[str]:
    """Distinct labels of remembered segments, ordered by first segment id."""
    labels: list[str] = []
    for seg in sorted(inv.personalized(), key=lambda s: s.segment_id):
        if seg.label not in labels:
            labels.append(seg.label)
    return labels


def train(
    model: InSituModel,
    inv: Inventory,
    vol: MultiVolume,
    config: TrainConfig | None = None,
    rng: np.random.Generator | None = None,
    progress=None,
) -> TrainReport:
    """One optimizer step per epoch on fresh stochastic graphs.

    Each epoch draws one graph per personalized segment plus an equal number of
    null graphs from non-personalized voxels. Stops once best accuracy reached
    the floor and has not improved for `cooldown` epochs, or at the cap.
    """
    config = config or TrainConfig()
    rng = rng or np.random.default_rng(model.rng_seed)
    positives = inv.personalized()
    if not positives:
        raise ValueError("no personalized segments to train on")
    # "improvement" = a new best accuracy or a new best loss; accuracy alone
    # saturates within dozens of steps on separable scenes while logits are
    # still too soft for the re-identification gates, so optimization progress
    # keeps the cooldown armed until the loss genuinely plateaus

    labels = personalized_labels(inv)
    missing = [lab for lab in labels if lab not in model.registry]
    if missing:
        raise ValueError(f"model registry lacks labels {missing}")
    for seg in positives:
        seg.insitu_class = model.label_index(seg.label)

    eligible = eligible_null_voxels(inv, vol)
    if len(eligible) < config.graph_size:
        raise ValueError(
            f"only {len(eligible)} non-personalized labeled voxels; "
            f"null sampling needs {config.graph_size}"
        )

    state = AdamState.for_model(model)
    start = time.monotonic()
    best_acc = -1.0
    best_loss = np.inf
    since_improve = 0
    losses: list[float] = []
    accs: list[float] = []
    reason = "cap"
    epochs = 0
    for epoch in range(1, config.epoch_cap + 1):
        epochs = epoch
        batch = [sample_object_graph(s, config.graph_size, rng) for s in positives]
        y = [s.insitu_class for s in positives]
        for _ in positives:
            batch.append(
                sample_null_graph(
                    inv, vol, config.graph_size, rng,
                    radius=config.null_radius, eligible=eligible,
                )
            )
            y.append(0)
        grads, loss, logits = grad(model, batch, y)
        acc = float(np.mean([int(np.argmax(lg)) == lab for lg, lab in zip(logits, y)]))
        adam_step(model, grads, state, lr=config.lr, beta1=config.beta1, beta2=config.beta2)
        losses.append(float(loss))
        accs.append(acc)
        improved = acc > best_acc or loss < best_loss
        best_acc = max(best_acc, acc)
        best_loss = min(best_loss, loss)
        since_improve = 0 if improved else since_improve + 1
        if progress is not None:
            progress(epoch, acc, best_acc)
        if best_acc >= config.accuracy_floor and since_improve >= config.cooldown:
            reason = "cooldown"
            break

    model.trained = True
    return TrainReport(
        epochs_run=epochs,
        best_accuracy=max(best_acc, 0.0),
        stopped_reason=reason,
        wall_time=time.monotonic() - start,
        loss_curve=losses,
        accuracy_curve=accs,
    )


def fit_inventory(
    inv: Inventory,
    vol: MultiVolume,
    config: TrainConfig | None = None,
    seed: int = 0,
    k: int = 5,
    progress=None,
) -> tuple[InSituModel, TrainReport]:
    """Initialize a model from the inventory's personalized labels and train it."""
    labels = personalized_labels(inv)
    if not labels:
        raise ValueError("no personalized segments to train on")
    config = config or TrainConfig()
    model = init_insitu_model(
        feature_dim=inv.grid.feature_dim,
        labels=labels,
        k=k,
        seed=seed,
        graph_size=config.graph_size,
    )
    report = train(model, inv, vol, config, rng=np.random.default_rng(seed), progress=progress)
    return model, report


def classify_segment(
    model: InSituModel,
    seg: ObjectSegment,
    m: int = 16,
    rng: np.random.Generator | None = None,
) -> tuple[str | None, float]:
    """Majority vote over m sampled graphs.

    Emits a label only when the vote share is >= 0.5 with no tie for the top
    vote and the mean softmax of the winning class is >= 0.6; otherwise null.
    Confidence is vote share times mean winning-class softmax either way.
    """
    if not model.trained:
        raise ValueError("model has not been trained")
    if m < 1:
        raise ValueError("vote count must be >= 1")
    rng = rng or np.random.default_rng()
    votes = np.zeros(model.num_classes, dtype=np.int64)
    probs = np.zeros((m, model.num_classes))
    for i in range(m):
        g = sample_object_graph(seg, model.graph_size, rng)
        logits = forward(model, g)
        p = softmax(logits)
        probs[i] = p
        votes[int(np.argmax(logits))] += 1
    winner = int(np.argmax(votes))
    share = votes[winner] / m
    mean_soft = float(probs[:, winner].mean())
    confidence = float(share * mean_soft)
    tie = int((votes == votes[winner]).sum()) > 1
    if tie or share < 0.5 or mean_soft < 0.6 or winner == 0:
        return None, confidence
    return model.registry[winner], confidence
