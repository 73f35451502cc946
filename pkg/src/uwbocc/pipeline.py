"""End-to-end orchestration: residuals, scorers, and the training driver.

This module owns the glue that the library pieces deliberately avoid:
computing residuals for whole datasets, deriving the SNR reference from the
training split, wrapping networks and classical detectors behind one scorer
interface, building augmented minibatches from epoch plans, and running the
training loop.  Everything is seeded through numpy SeedSequence tuples
(seed, epoch, draw, ...) so results never depend on scheduling or iteration
order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .augment import (
    AugmentPolicy,
    SnrReference,
    add_noise,
    compute_reference_energy,
    normalize_unit_energy,
)
from .baselines import DEFAULT_ENERGY_WINDOW, energy_detector, fft_detector
from .core import ActivityLabel, MeanRemovedMatrix, mean_remove
from .dataset import (
    DatasetManifest,
    ManifestRecord,
    Split,
    SplitAssignment,
    build_epoch_plan,
)
from .errors import ConfigError, DataError
from .evaluate import roc_auc
from .nn.model import (
    VARIANTS,
    Network,
    build_network,
    flop_count,
    layout_2d,
    stack_real_imag_1d,
)
from .nn.training import EarlyStoppingConfig, OptimizerConfig, TrainingHistory, train_network

__all__ = [
    "ResidualSample",
    "residual_samples",
    "memory_manifest",
    "assign_samples",
    "reference_from_training",
    "NetworkScorer",
    "BaselineScorer",
    "TrainSettings",
    "run_training",
]


@dataclass(frozen=True)
class ResidualSample:
    """A mean-removed sample ready for augmentation and scoring."""

    label: ActivityLabel
    residual: MeanRemovedMatrix


def residual_samples(records) -> list[ResidualSample]:
    """Mean-remove every record once; downstream draws reuse the residuals."""
    out = []
    for rec in records:
        _, residual = mean_remove(rec.cir)
        out.append(ResidualSample(rec.label, residual))
    return out


def memory_manifest(records) -> DatasetManifest:
    """Manifest for in-memory records, aligned with them by position.

    Gives split logic something to chew on without touching disk; the
    fabricated file names only need to be unique and order-stable.
    """
    entries = []
    radar_shape = None
    for i, rec in enumerate(records):
        entries.append(ManifestRecord(f"mem_{i:05d}", rec.label, rec.car, rec.seat,
                                      rec.participant, rec.segment_index))
        radar_shape = rec.cir
    if radar_shape is None:
        raise DataError("cannot build a manifest from zero records")
    from .simulate import RadarConfig

    radar = RadarConfig(n_fast=radar_shape.n_fast, m_slow=radar_shape.m_slow,
                        dt_fast=radar_shape.dt_fast, dt_slow=radar_shape.dt_slow)
    return DatasetManifest(tuple(entries), radar)


def assign_samples(manifest: DatasetManifest, samples, split: SplitAssignment) -> dict:
    """Group (record, sample) pairs by split, using manifest order to pair up.

    Pairs within each split come back in recording order, so downstream
    consumers see one deterministic sequence.
    """
    if len(manifest.records) != len(samples):
        raise DataError(
            f"manifest has {len(manifest.records)} records but {len(samples)} samples given")
    by_split: dict = {s: [] for s in Split}
    lookup = dict(zip(manifest.records, samples))
    for rec, assigned in split.assignment.items():
        by_split[assigned].append((rec, lookup[rec]))
    for s in Split:
        by_split[s].sort(key=lambda kv: kv[0].sort_key())
    return by_split


def reference_from_training(train_records) -> SnrReference:
    """The SNR anchor: median residual energy of breathing training samples."""
    breathing = [r for r in train_records if r.label is ActivityLabel.BREATHING]
    if not breathing:
        raise DataError("training split has no breathing samples to anchor the SNR reference")
    residuals = [s.residual for s in residual_samples(breathing)]
    return compute_reference_energy(residuals)


class NetworkScorer:
    """Scores residual batches with a trained network (inference mode)."""

    def __init__(self, network: Network, name: str | None = None, chunk: int = 256):
        self.network = network
        self.name = name or network.variant.name
        self.flops = flop_count(network)
        self.chunk = chunk

    def _layout(self, residual: MeanRemovedMatrix) -> np.ndarray:
        if self.network.variant.dimensionality == 1:
            return stack_real_imag_1d(residual)
        return layout_2d(residual).transpose(2, 0, 1)  # channels first

    def __call__(self, residuals) -> np.ndarray:
        batch = np.stack([self._layout(r) for r in residuals])
        scores = []
        for start in range(0, len(batch), self.chunk):
            scores.append(self.network.forward(batch[start:start + self.chunk], train=False))
        return np.concatenate(scores)


class BaselineScorer:
    """Scores residual batches with a classical detector function."""

    KINDS = ("energy", "fft")

    def __init__(self, kind: str, window_cols: int = DEFAULT_ENERGY_WINDOW):
        if kind not in self.KINDS:
            raise ConfigError(f"unknown baseline {kind!r}; choose from {self.KINDS}")
        self.kind = kind
        self.name = kind
        self.window_cols = window_cols
        self.flops = 0  # estimated lazily per input shape on first call

    def _estimate_flops(self, residual: MeanRemovedMatrix) -> int:
        n, m = residual.data.shape
        if self.kind == "energy":
            return 4 * n * m + 2 * m
        return int(5 * n * m * max(np.log2(m), 1.0))

    def __call__(self, residuals) -> np.ndarray:
        if residuals and not self.flops:
            self.flops = self._estimate_flops(residuals[0])
        if self.kind == "energy":
            return np.asarray([energy_detector(r, self.window_cols) for r in residuals])
        return np.asarray([fft_detector(r) for r in residuals])


@dataclass(frozen=True)
class TrainSettings:
    """Everything run_training needs beyond the data itself."""

    variant: str = "1D-E"
    kernel: int = 3
    snr_lo: float = -30.0
    snr_hi: float = 0.0
    exact_scaling: bool = False
    reuse_occupied: int = 200
    reuse_empty: int = 3000
    batch_size: int = 64
    learning_rate: float = 1e-3
    patience: int = 10
    max_epochs: int = 200
    validation_snr: float = -15.0
    seed: int = 0

    def optimizer(self) -> OptimizerConfig:
        return OptimizerConfig(learning_rate=self.learning_rate, batch_size=self.batch_size)

    def stopping(self) -> EarlyStoppingConfig:
        return EarlyStoppingConfig(patience=self.patience, max_epochs=self.max_epochs)

    def policy(self) -> AugmentPolicy:
        return AugmentPolicy.train_uniform(self.snr_lo, self.snr_hi,
                                           exact_scaling=self.exact_scaling)


def _layout_for(variant_name: str):
    variant = VARIANTS.get(variant_name)
    if variant is None:
        raise ConfigError(f"unknown variant {variant_name!r}; known: {', '.join(sorted(VARIANTS))}")

    if variant.dimensionality == 1:
        return variant, lambda res: stack_real_imag_1d(res)
    return variant, lambda res: layout_2d(res).transpose(2, 0, 1)


def _epoch_batches(plan_records, residual_by_file, ref, settings, layout, epoch):
    """Yield (inputs, labels) minibatches for one epoch, deterministically.

    Each draw's SNR and noise come from a SeedSequence keyed by (seed,
    epoch, draw position), so the stream is reproducible under any worker
    arrangement.  A trailing partial batch below 2 samples is dropped
    because batch statistics are undefined for it.
    """
    policy = settings.policy()
    batch_inputs, batch_labels = [], []
    for position, (record, _draw) in enumerate(plan_records):
        residual = residual_by_file[record.file]
        rng = np.random.default_rng(np.random.SeedSequence((settings.seed, epoch, position)))
        snr_db = float(rng.uniform(settings.snr_lo, settings.snr_hi))
        noisy = add_noise(residual, ref, snr_db, policy, rng=rng)
        batch_inputs.append(layout(normalize_unit_energy(noisy)))
        batch_labels.append(1.0 if record.label.occupied else 0.0)
        if len(batch_inputs) == settings.batch_size:
            yield np.stack(batch_inputs), np.asarray(batch_labels)
            batch_inputs, batch_labels = [], []
    if len(batch_inputs) >= 2:
        yield np.stack(batch_inputs), np.asarray(batch_labels)


# Stream tags keeping validation-corruption seeds disjoint from the
# (seed, epoch, position) tuples that drive training draws.
_VALIDATION_STREAM = 0x5EED_A11


def _validation_scorer(val_samples, ref, settings, layout):
    """Corrupt the validation set once, at a fixed SNR, and score each epoch.

    Freezing the corruption keeps the early-stopping signal comparable
    across epochs; the per-sample seeds derive from the training seed.
    """
    inputs, labels = [], []
    for i, sample in enumerate(val_samples):
        rng = np.random.default_rng(np.random.SeedSequence((settings.seed, _VALIDATION_STREAM, i)))
        noisy = add_noise(sample.residual, ref, settings.validation_snr, None, rng=rng)
        inputs.append(layout(normalize_unit_energy(noisy)))
        labels.append(1.0 if sample.label.occupied else 0.0)
    batch = np.stack(inputs)
    labels = np.asarray(labels)
    if labels.min() == labels.max():
        raise DataError("validation split needs both classes for AUC-based early stopping")

    def score(network: Network) -> float:
        logits = []
        for start in range(0, len(batch), 256):
            logits.append(network.forward(batch[start:start + 256], train=False))
        return roc_auc(np.concatenate(logits), labels)

    return score


def run_training(manifest: DatasetManifest, samples, split: SplitAssignment,
                 settings: TrainSettings | None = None, log=None
                 ) -> tuple[Network, TrainingHistory, SnrReference]:
    """Train one variant on a split dataset; returns (network, history, ref).

    The SNR reference comes from the breathing training residuals; training
    minibatches follow a fresh seeded epoch plan every epoch; early stopping
    monitors AUC on the fixed-corruption validation set.
    """
    settings = settings or TrainSettings()
    variant, layout = _layout_for(settings.variant)
    by_split = assign_samples(manifest, samples, split)
    train_pairs = by_split[Split.TRAIN]
    if not train_pairs:
        raise DataError("training split is empty")

    train_samples = [sample for _, sample in train_pairs]
    ref = reference_from_training(train_samples)
    train_residuals = residual_samples(train_samples)
    residual_by_file = {rec.file: res.residual
                        for (rec, _), res in zip(train_pairs, train_residuals)}

    val_samples = residual_samples([sample for _, sample in by_split[Split.VALIDATION]])
    if not val_samples:
        raise DataError("validation split is empty")
    scorer = _validation_scorer(val_samples, ref, settings, layout)

    first = train_samples[0].cir
    if variant.dimensionality == 1:
        input_shape = (2 * first.n_fast, first.m_slow)
    else:
        input_shape = (2, first.n_fast, first.m_slow)
    network = build_network(variant, input_shape, kernel=settings.kernel, seed=settings.seed)

    def batches(epoch: int):
        plan = build_epoch_plan(split, seed=int(np.random.SeedSequence(
            (settings.seed, epoch)).generate_state(1)[0]),
            reuse_occupied=settings.reuse_occupied, reuse_empty=settings.reuse_empty)
        return _epoch_batches(plan.entries, residual_by_file, ref, settings, layout, epoch)

    history = train_network(network, batches, scorer,
                            optimizer_config=settings.optimizer(),
                            stopping=settings.stopping(), log=log)
    return network, history, ref
