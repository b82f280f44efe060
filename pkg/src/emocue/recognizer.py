"""Two-stage identification: emotion first, then emotion-specific speaker.

Stage a scores an utterance against every emotion's blended acoustic plus
prosodic model pair and keeps the best emotion. Stage b then compares the
speakers' acoustic models trained for that emotion only. A one-stage
baseline (per-speaker models pooled over all emotions) is carried alongside
for comparison. Ties always resolve to the earliest candidate in bank
order, which keeps every decision deterministic.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Mapping, NamedTuple

from . import hmm, supra as supra_mod
from .errors import EmptyBankError, UnknownEmotionError, UnsupportedFormatError
from .frontend import UtteranceFeatures
from .supra import FusionConfig, SupraMapping, SuprasegmentalModel, fused_score


class EmotionModels(NamedTuple):
    """The acoustic and prosodic model pair of one emotion."""

    acoustic: hmm.AcousticModel
    supra: SuprasegmentalModel


@dataclass(frozen=True)
class ModelBank:
    """Every trained model of one experiment, keyed by role.

    speaker_models maps (speaker, emotion) pairs and must cover the full
    cross product; one_stage_models may be empty until the baseline is
    trained.
    """

    emotions: tuple[str, ...]
    speakers: tuple[str, ...]
    emotion_models: Mapping[str, EmotionModels]
    speaker_models: Mapping[tuple[str, str], hmm.AcousticModel]
    one_stage_models: Mapping[str, hmm.AcousticModel]

    def __post_init__(self):
        emotions = tuple(self.emotions)
        speakers = tuple(self.speakers)
        object.__setattr__(self, "emotions", emotions)
        object.__setattr__(self, "speakers", speakers)
        if set(self.emotion_models) != set(emotions):
            raise ValueError("emotion_models must cover exactly the bank's emotions")
        expected_pairs = {(s, e) for s in speakers for e in emotions}
        if set(self.speaker_models) != expected_pairs:
            raise ValueError("speaker_models must cover speakers x emotions")
        if self.one_stage_models and set(self.one_stage_models) != set(speakers):
            raise ValueError("one_stage_models must cover exactly the speakers")
        dims = {m.acoustic.feature_dim for m in self.emotion_models.values()}
        dims |= {m.feature_dim for m in self.speaker_models.values()}
        dims |= {m.feature_dim for m in self.one_stage_models.values()}
        if len(dims) > 1:
            raise ValueError(f"models disagree on feature dimension: {sorted(dims)}")


@dataclass(frozen=True)
class IdentificationResult:
    """Outcome of a two-stage pass over one utterance."""

    identified_emotion: str
    identified_speaker: str
    emotion_scores: dict[str, float]
    speaker_scores: dict[str, float]

    def __post_init__(self):
        if self.emotion_scores[self.identified_emotion] < max(
                self.emotion_scores.values()):
            raise ValueError("identified emotion must attain the score maximum")
        if self.speaker_scores[self.identified_speaker] < max(
                self.speaker_scores.values()):
            raise ValueError("identified speaker must attain the score maximum")


def _argmax_label(labels, scores) -> str:
    """Earliest label attaining the maximum score."""
    best = labels[0]
    for label in labels[1:]:
        if scores[label] > scores[best]:
            best = label
    return best


def identify_emotion(utterance, bank: ModelBank,
                     cfg: FusionConfig = FusionConfig()):
    """Stage a: best emotion by blended score, with all candidate scores."""
    if not bank.emotions:
        raise EmptyBankError("bank has no emotion models")
    scores = {e: fused_score(bank.emotion_models[e].acoustic,
                             bank.emotion_models[e].supra, utterance, cfg)
              for e in bank.emotions}
    return _argmax_label(bank.emotions, scores), scores


def identify_speaker_given_emotion(features, e_star: str, bank: ModelBank):
    """Stage b: best speaker under the given emotion's acoustic models."""
    if e_star not in bank.emotions:
        raise UnknownEmotionError(f"no models for emotion {e_star!r}")
    if not bank.speakers:
        raise EmptyBankError("bank has no speaker models")
    scores = {s: hmm.forward_log_likelihood(bank.speaker_models[(s, e_star)],
                                            features)
              for s in bank.speakers}
    return _argmax_label(bank.speakers, scores), scores


def two_stage_identify(utterance, bank: ModelBank,
                       cfg: FusionConfig = FusionConfig()) -> IdentificationResult:
    """Run stage a, feed its emotion into stage b, report both decisions."""
    features, _ = utterance
    e_star, emotion_scores = identify_emotion(utterance, bank, cfg)
    s_star, speaker_scores = identify_speaker_given_emotion(features, e_star, bank)
    return IdentificationResult(identified_emotion=e_star,
                                identified_speaker=s_star,
                                emotion_scores=emotion_scores,
                                speaker_scores=speaker_scores)


def one_stage_identify(features, bank: ModelBank):
    """Baseline: best speaker under the emotion-pooled models."""
    if not bank.one_stage_models:
        raise EmptyBankError("bank has no one-stage models")
    scores = {s: hmm.forward_log_likelihood(bank.one_stage_models[s], features)
              for s in bank.speakers}
    return _argmax_label(bank.speakers, scores), scores


# --- training ----------------------------------------------------------------

def _ordered_labels(values) -> tuple[str, ...]:
    return tuple(dict.fromkeys(values))


def train_model_bank(train_records, features: Mapping[str, UtteranceFeatures],
                     num_states: int = 9, num_mixtures: int = 10,
                     num_supra_mixtures: int = supra_mod.DEFAULT_SUPRA_MIXTURES,
                     supra_groups: tuple[int, ...] = supra_mod.DEFAULT_GROUPS,
                     variance_floor: float = hmm.VARIANCE_FLOOR,
                     em_tol: float = hmm.EM_TOL,
                     em_max_iters: int = hmm.EM_MAX_ITERS,
                     include_one_stage: bool = True) -> ModelBank:
    """Train every model role from one training split.

    Emotion models pool all speakers of an emotion; speaker models take one
    (speaker, emotion) cell each; one-stage models pool one speaker across
    all emotions. Candidate order follows first appearance in the records.
    """
    records = list(train_records)
    if not records:
        raise EmptyBankError("no training records")
    emotions = _ordered_labels(r.emotion for r in records)
    speakers = _ordered_labels(r.speaker for r in records)
    mapping = SupraMapping(group_sizes=supra_groups)
    if mapping.num_acoustic_states != num_states:
        raise ValueError(
            f"supra groups cover {mapping.num_acoustic_states} states, "
            f"model has {num_states}")

    def fit(seqs):
        init = hmm.init_model(seqs, num_states, num_mixtures,
                              variance_floor=variance_floor)
        model, _ = hmm.baum_welch(init, seqs, max_iters=em_max_iters,
                                  tol=em_tol, variance_floor=variance_floor)
        return model

    emotion_models = {}
    for e in emotions:
        utts = [features[r.id] for r in records if r.emotion == e]
        acoustic = fit([u.features for u in utts])
        supra_model, _ = supra_mod.train_suprasegmental(
            acoustic, utts, mapping, num_mixtures=num_supra_mixtures,
            max_iters=em_max_iters, tol=em_tol, variance_floor=variance_floor)
        emotion_models[e] = EmotionModels(acoustic=acoustic, supra=supra_model)

    speaker_models = {}
    for s in speakers:
        for e in emotions:
            seqs = [features[r.id].features for r in records
                    if r.speaker == s and r.emotion == e]
            speaker_models[(s, e)] = fit(seqs)

    one_stage_models = {}
    if include_one_stage:
        for s in speakers:
            seqs = [features[r.id].features for r in records if r.speaker == s]
            one_stage_models[s] = fit(seqs)

    return ModelBank(emotions=emotions, speakers=speakers,
                     emotion_models=emotion_models,
                     speaker_models=speaker_models,
                     one_stage_models=one_stage_models)


@dataclass(frozen=True)
class ResultRow:
    """One scored test utterance with truth labels carried along."""

    id: str
    true_speaker: str
    true_emotion: str
    gender: str
    identified_emotion: str
    identified_speaker: str
    one_stage_speaker: str | None
    emotion_scores: dict[str, float]
    speaker_scores: dict[str, float]


def score_test_set(bank: ModelBank, test_records,
                   features: Mapping[str, UtteranceFeatures],
                   cfg: FusionConfig = FusionConfig()) -> list[ResultRow]:
    """Two-stage (and, when available, one-stage) decisions for a test split."""
    rows = []
    for r in test_records:
        utt = features[r.id]
        result = two_stage_identify(utt, bank, cfg)
        if bank.one_stage_models:
            one_stage, _ = one_stage_identify(utt.features, bank)
        else:
            one_stage = None
        rows.append(ResultRow(
            id=r.id, true_speaker=r.speaker, true_emotion=r.emotion,
            gender=r.gender, identified_emotion=result.identified_emotion,
            identified_speaker=result.identified_speaker,
            one_stage_speaker=one_stage,
            emotion_scores=result.emotion_scores,
            speaker_scores=result.speaker_scores))
    return rows


# --- persistence -------------------------------------------------------------

BANK_FORMAT = "emocue-bank"
BANK_VERSION = 1
_BANK_INDEX = "bank.json"


def save_bank(bank: ModelBank, directory) -> None:
    """Write every model file plus an index that names each one's role."""
    os.makedirs(directory, exist_ok=True)
    emotion_files = {}
    for idx, e in enumerate(bank.emotions):
        acoustic_name = f"emotion_{idx}.acoustic.json"
        supra_name = f"emotion_{idx}.supra.json"
        hmm.save_model(bank.emotion_models[e].acoustic,
                       os.path.join(directory, acoustic_name))
        supra_mod.save_supra_model(bank.emotion_models[e].supra,
                                   os.path.join(directory, supra_name))
        emotion_files[e] = {"acoustic": acoustic_name, "supra": supra_name}
    speaker_files: dict[str, dict[str, str]] = {}
    for s_idx, s in enumerate(bank.speakers):
        speaker_files[s] = {}
        for e_idx, e in enumerate(bank.emotions):
            name = f"speaker_{s_idx}_{e_idx}.json"
            hmm.save_model(bank.speaker_models[(s, e)],
                           os.path.join(directory, name))
            speaker_files[s][e] = name
    one_stage_files = {}
    for s_idx, s in enumerate(bank.speakers):
        if s in bank.one_stage_models:
            name = f"onestage_{s_idx}.json"
            hmm.save_model(bank.one_stage_models[s],
                           os.path.join(directory, name))
            one_stage_files[s] = name
    index = {"format": BANK_FORMAT, "version": BANK_VERSION,
             "emotions": list(bank.emotions), "speakers": list(bank.speakers),
             "emotion_files": emotion_files, "speaker_files": speaker_files,
             "one_stage_files": one_stage_files}
    with open(os.path.join(directory, _BANK_INDEX), "w", encoding="utf-8") as fh:
        json.dump(index, fh, indent=2)
        fh.write("\n")


def load_bank(directory) -> ModelBank:
    index_path = os.path.join(directory, _BANK_INDEX)
    with open(index_path, "r", encoding="utf-8") as fh:
        index = json.load(fh)
    if index.get("format") != BANK_FORMAT or index.get("version") != BANK_VERSION:
        raise UnsupportedFormatError(f"{index_path}: not a recognized bank index")
    emotions = tuple(index["emotions"])
    speakers = tuple(index["speakers"])
    emotion_models = {
        e: EmotionModels(
            acoustic=hmm.load_model(
                os.path.join(directory, index["emotion_files"][e]["acoustic"])),
            supra=supra_mod.load_supra_model(
                os.path.join(directory, index["emotion_files"][e]["supra"])))
        for e in emotions}
    speaker_models = {
        (s, e): hmm.load_model(
            os.path.join(directory, index["speaker_files"][s][e]))
        for s in speakers for e in emotions}
    one_stage_models = {
        s: hmm.load_model(os.path.join(directory, name))
        for s, name in index.get("one_stage_files", {}).items()}
    return ModelBank(emotions=emotions, speakers=speakers,
                     emotion_models=emotion_models,
                     speaker_models=speaker_models,
                     one_stage_models=one_stage_models)
