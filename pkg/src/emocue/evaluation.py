"""Evaluation statistics: confusion matrices, accuracy tables, pooled-SD
t values, and the fusion-weight sweep.

Conventions follow the reporting style of emotion-aware speaker studies:
confusion columns are the true emotions and sum to 100%, accuracy tables
cross emotion with speaker gender and average per row, and two recognizers
are compared by t = (mean2 - mean1) / sqrt((sd1^2 + sd2^2) / n). All
arithmetic is done at full precision; rounding happens only when tables are
written out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import recognizer
from .errors import EmptyResultsError, UnknownLabelError
from .supra import score_components

# Reference point for the t statistics: one-sided critical value at the
# 0.05 significance level.
T_CRITICAL_005 = 1.645

GENDERS = ("male", "female")
DEFAULT_ALPHAS = tuple(round(0.1 * i, 1) for i in range(11))


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ConfusionMatrix:
    """Column-stochastic percentage matrix; cell (r, c) is the share of
    utterances truly of emotion c that were identified as emotion r."""

    labels: tuple[str, ...]
    cells: np.ndarray  # (m, m) percentages

    def __post_init__(self):
        labels = tuple(self.labels)
        cells = np.asarray(self.cells, dtype=np.float64)
        m = len(labels)
        if cells.shape != (m, m):
            raise ValueError(f"cells must be ({m}, {m}), got {cells.shape}")
        if np.any(cells < 0.0):
            raise ValueError("confusion percentages must be non-negative")
        if np.any(np.abs(cells.sum(axis=0) - 100.0) > 1e-9):
            raise ValueError("every column must sum to 100")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "cells", _readonly(cells))


def confusion_matrix(results, labels=None) -> ConfusionMatrix:
    """Build the confusion matrix from (true label, identified label) pairs.

    labels fixes the row/column order; by default the labels seen in the
    results are taken in sorted order. Every label must actually occur as a
    truth at least once, otherwise its column would be undefined.
    """
    pairs = list(results)
    if not pairs:
        raise EmptyResultsError("no results to tabulate")
    if labels is None:
        labels = sorted({t for t, _ in pairs} | {p for _, p in pairs})
    labels = tuple(labels)
    index = {label: i for i, label in enumerate(labels)}
    counts = np.zeros((len(labels), len(labels)))
    for true, predicted in pairs:
        if true not in index or predicted not in index:
            raise UnknownLabelError(
                f"result labels {true!r}/{predicted!r} outside {labels}")
        counts[index[predicted], index[true]] += 1
    totals = counts.sum(axis=0)
    missing = [labels[i] for i in np.flatnonzero(totals == 0)]
    if missing:
        raise ValueError(f"labels never appear as truth: {missing}")
    return ConfusionMatrix(labels=labels, cells=100.0 * counts / totals)


def average_diagonal(cm: ConfusionMatrix) -> float:
    """Mean of the per-emotion correct-identification percentages."""
    return float(np.mean(np.diag(cm.cells)))


@dataclass(frozen=True)
class PerformanceTable:
    """Speaker-identification accuracy crossed by emotion and gender.

    row_averages holds the per-emotion means across genders; overall_mean
    and overall_sd (n-1 denominator) summarize those row averages.
    """

    emotions: tuple[str, ...]
    genders: tuple[str, ...]
    cells: np.ndarray         # (m, num_genders) percentages
    row_averages: np.ndarray  # (m,)
    overall_mean: float
    overall_sd: float

    def __post_init__(self):
        object.__setattr__(self, "emotions", tuple(self.emotions))
        object.__setattr__(self, "genders", tuple(self.genders))
        object.__setattr__(self, "cells", _readonly(self.cells))
        object.__setattr__(self, "row_averages", _readonly(self.row_averages))


def performance_table(results, emotions=None,
                      genders=GENDERS) -> PerformanceTable:
    """Tabulate accuracy from (true speaker, identified speaker, true
    emotion, gender) records."""
    rows = list(results)
    if not rows:
        raise EmptyResultsError("no results to tabulate")
    if emotions is None:
        emotions = sorted({e for _, _, e, _ in rows})
    emotions = tuple(emotions)
    genders = tuple(genders)
    correct = np.zeros((len(emotions), len(genders)))
    total = np.zeros((len(emotions), len(genders)))
    e_index = {e: i for i, e in enumerate(emotions)}
    g_index = {g: i for i, g in enumerate(genders)}
    for true_speaker, identified, emotion, gender in rows:
        if emotion not in e_index:
            raise UnknownLabelError(f"unknown emotion {emotion!r}")
        if gender not in g_index:
            raise UnknownLabelError(f"unknown gender {gender!r}")
        total[e_index[emotion], g_index[gender]] += 1
        correct[e_index[emotion], g_index[gender]] += (true_speaker == identified)
    if np.any(total == 0):
        empty = [(emotions[i], genders[j])
                 for i, j in zip(*np.nonzero(total == 0))]
        raise ValueError(f"no utterances for groups {empty}")
    cells = 100.0 * correct / total
    row_averages = cells.mean(axis=1)
    overall_sd = (float(np.std(row_averages, ddof=1))
                  if row_averages.size > 1 else 0.0)
    return PerformanceTable(emotions=emotions, genders=genders, cells=cells,
                            row_averages=row_averages,
                            overall_mean=float(row_averages.mean()),
                            overall_sd=overall_sd)


@dataclass(frozen=True)
class TTestResult:
    """Two-sample comparison via the pooled-SD Student t statistic."""

    mean_1: float
    mean_2: float
    sd_1: float
    sd_2: float
    n_pool: int
    sd_pooled: float
    t: float


def _pooled(mean_1: float, sd_1: float, mean_2: float, sd_2: float,
            n_pool: int) -> TTestResult:
    if n_pool < 1:
        raise ValueError(f"n_pool must be >= 1, got {n_pool}")
    sd_pooled = float(np.sqrt((sd_1 ** 2 + sd_2 ** 2) / n_pool))
    diff = mean_2 - mean_1
    if diff == 0.0:
        t = 0.0
    elif sd_pooled == 0.0:
        # any difference between two zero-spread samples is infinitely clear
        t = math.copysign(math.inf, diff)
    else:
        t = diff / sd_pooled
    return TTestResult(mean_1=float(mean_1), mean_2=float(mean_2),
                       sd_1=float(sd_1), sd_2=float(sd_2), n_pool=int(n_pool),
                       sd_pooled=sd_pooled, t=float(t))


def pooled_t(sample_1, sample_2, n_pool: int) -> TTestResult:
    """t statistic between two samples of percentages.

    Sample standard deviations use the n-1 denominator. n_pool is the n in
    the pooled-SD formula and is supplied by the caller rather than taken
    from the sample sizes, so reported statistics can be reproduced even
    when a study pooled over a different n.
    """
    a = np.asarray(sample_1, dtype=np.float64)
    b = np.asarray(sample_2, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ValueError("each sample needs at least two values")
    return _pooled(a.mean(), a.std(ddof=1), b.mean(), b.std(ddof=1), n_pool)


def pooled_t_from_stats(mean_1: float, sd_1: float, mean_2: float, sd_2: float,
                        n_pool: int) -> TTestResult:
    """t statistic from already-summarized samples (reported means and SDs)."""
    return _pooled(mean_1, sd_1, mean_2, sd_2, n_pool)


# --- fusion-weight sweep -----------------------------------------------------

@dataclass(frozen=True)
class SweepResult:
    """Speaker accuracy by true emotion for each fusion weight."""

    alphas: tuple[float, ...]
    emotions: tuple[str, ...]
    accuracies: np.ndarray  # (num_alphas, m) percentages
    overall: np.ndarray     # (num_alphas,)

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(self.alphas))
        object.__setattr__(self, "emotions", tuple(self.emotions))
        object.__setattr__(self, "accuracies", _readonly(self.accuracies))
        object.__setattr__(self, "overall", _readonly(self.overall))

    def accuracy_at(self, alpha: float, emotion: str) -> float:
        return float(self.accuracies[self.alphas.index(alpha),
                                     self.emotions.index(emotion)])


def alpha_sweep(bank, test_records, features, alphas=DEFAULT_ALPHAS,
                length_normalize: bool = True) -> SweepResult:
    """Re-run the emotion stage across fusion weights and measure stage-b
    speaker accuracy per true emotion.

    Both log scores are computed once per (utterance, emotion) and blended
    per alpha; the speaker stage does not depend on alpha, so its verdict
    is cached per (utterance, chosen emotion). Scores are length-normalized
    by default: without normalization the acoustic term's sheer magnitude
    makes the blend weight nearly inert.
    """
    records = list(test_records)
    if not records:
        raise EmptyResultsError("no test records")
    emotions = bank.emotions
    components = {}
    for r in records:
        utt = features[r.id]
        components[r.id] = {
            e: score_components(bank.emotion_models[e].acoustic,
                                bank.emotion_models[e].supra, utt,
                                length_normalize)
            for e in emotions}

    speaker_verdict: dict[tuple[str, str], bool] = {}

    def speaker_correct(record, e_star: str) -> bool:
        key = (record.id, e_star)
        if key not in speaker_verdict:
            s_star, _ = recognizer.identify_speaker_given_emotion(
                features[record.id].features, e_star, bank)
            speaker_verdict[key] = (s_star == record.speaker)
        return speaker_verdict[key]

    e_counts = {e: sum(1 for r in records if r.emotion == e) for e in emotions}
    missing = [e for e, c in e_counts.items() if c == 0]
    if missing:
        raise ValueError(f"emotions without test utterances: {missing}")

    accuracies = np.zeros((len(alphas), len(emotions)))
    overall = np.zeros(len(alphas))
    for a_idx, alpha in enumerate(alphas):
        correct = {e: 0 for e in emotions}
        for r in records:
            comp = components[r.id]
            scores = {e: (1.0 - alpha) * comp[e][0] + alpha * comp[e][1]
                      for e in emotions}
            e_star = recognizer._argmax_label(emotions, scores)
            if speaker_correct(r, e_star):
                correct[r.emotion] += 1
        for e_idx, e in enumerate(emotions):
            accuracies[a_idx, e_idx] = 100.0 * correct[e] / e_counts[e]
        overall[a_idx] = 100.0 * sum(correct.values()) / len(records)
    return SweepResult(alphas=tuple(float(a) for a in alphas),
                       emotions=emotions, accuracies=accuracies,
                       overall=overall)


# --- table output ------------------------------------------------------------

def write_confusion_tsv(cm: ConfusionMatrix, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("model\t" + "\t".join(cm.labels) + "\n")
        for i, label in enumerate(cm.labels):
            cells = "\t".join(f"{v:.2f}" for v in cm.cells[i])
            fh.write(f"{label}\t{cells}\n")


def write_performance_tsv(table: PerformanceTable, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("emotion\t" + "\t".join(table.genders) + "\taverage\n")
        for i, emotion in enumerate(table.emotions):
            cells = "\t".join(f"{v:.2f}" for v in table.cells[i])
            fh.write(f"{emotion}\t{cells}\t{table.row_averages[i]:.2f}\n")
        fh.write(f"mean\t\t\t{table.overall_mean:.2f}\n")
        fh.write(f"sd\t\t\t{table.overall_sd:.2f}\n")


def write_sweep_tsv(sweep: SweepResult, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("alpha\t" + "\t".join(sweep.emotions) + "\toverall\n")
        for i, alpha in enumerate(sweep.alphas):
            cells = "\t".join(f"{v:.2f}" for v in sweep.accuracies[i])
            fh.write(f"{alpha:.1f}\t{cells}\t{sweep.overall[i]:.2f}\n")
