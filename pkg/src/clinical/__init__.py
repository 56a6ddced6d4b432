"""
EHR model, patient encoder and formal training
"""

from .ehr import DDIMatrix, EHRVocab, PatientHistory, Visit, medication_matrix
from .patient_encoder import (
    PatientEncoder, embed_visit, encode_history, predict_scores, threshold_select,
)
from .trainer import ClinicalModel, TrainConfig, TrainResult, train_clinical

__all__ = [
    "EHRVocab", "Visit", "PatientHistory", "DDIMatrix", "medication_matrix",
    "PatientEncoder", "embed_visit", "encode_history", "predict_scores", "threshold_select",
    "ClinicalModel", "TrainConfig", "TrainResult", "train_clinical",
]
