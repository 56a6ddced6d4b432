"""
Dataset files for MKMed

Reads and writes the generated dataset directory:

    molecules.jsonl   {"id", "smiles"} per line
    modalities.jsonl  one MultimodalRecord per line, arrays base64-encoded
    kg.jsonl          {"head", "relation", "tail"} per line
    ehr.jsonl         one PatientHistory per line
    ddi.json          {"size", "pairs"}
    rules.json        hidden rule table
    vocab.json        EHR vocabulary sizes

Every writer emits sorted keys so files are byte-stable per seed.
"""

import base64
import json
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from ..align.records import MultimodalRecord
from ..clinical.ehr import DDIMatrix, EHRVocab, PatientHistory
from ..molkit import Conformer, KGTriple, MoleculeImage, PropertyVector, TextDescription, parse_smiles
from .errors import ConfigError, MKMedError

PathLike = Union[str, Path]

DATASET_FILES = ("molecules.jsonl", "modalities.jsonl", "kg.jsonl", "ehr.jsonl",
                 "ddi.json", "rules.json", "vocab.json")

SPLIT_FRACTIONS = (2 / 3, 1 / 6)


def encode_array(a: np.ndarray, dtype: str = "<f4") -> Dict[str, Any]:
    a = np.ascontiguousarray(a, dtype=np.dtype(dtype))
    return {"dtype": dtype, "shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def decode_array(blob: Dict[str, Any]) -> np.ndarray:
    raw = base64.b64decode(blob["data"])
    return np.frombuffer(raw, dtype=np.dtype(blob["dtype"])).reshape(blob["shape"]).copy()


def _dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_jsonl(path: PathLike, rows: Iterable[Dict[str, Any]]):
    with open(path, "w") as f:
        for row in rows:
            f.write(_dumps(row) + "\n")


def read_jsonl(path: PathLike) -> List[Dict[str, Any]]:
    rows = []
    with open(path, "r") as f:
        for line_no, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise ConfigError(f"{path} line {line_no}: malformed JSON: {e}") from e
    return rows


def write_json(path: PathLike, obj: Any):
    with open(path, "w") as f:
        f.write(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def read_json(path: PathLike) -> Any:
    with open(path, "r") as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: malformed JSON: {e}") from e


@contextmanager
def _malformed(path: PathLike):
    """Re-raise a bad field or value in a dataset file as ConfigError"""
    try:
        yield
    except MKMedError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"{path}: malformed content: {type(e).__name__}: {e}") from e


def record_to_dict(r: MultimodalRecord) -> Dict[str, Any]:
    """JSON form of a record; a missing modality has no key at all"""
    out: Dict[str, Any] = {"mol_id": r.mol_id, "smiles": r.smiles}
    if r.image is not None:
        out["image"] = {"pixels": encode_array(r.image.pixels), "seed": r.image.seed}
    if r.text is not None:
        out["text"] = {"ids": list(r.text.token_ids), "segments": [list(s) for s in r.text.segments]}
    if r.conformer is not None:
        out["conformer"] = {"coordinates": encode_array(r.conformer.coordinates, "<f8"), "seed": r.conformer.seed}
    if r.props is not None:
        out["props"] = r.props.to_array().tolist()
    if r.kg_id is not None:
        out["kg_id"] = r.kg_id
    return out


def record_from_dict(data: Dict[str, Any]) -> MultimodalRecord:
    g = parse_smiles(data["smiles"])
    fields: Dict[str, Any] = {}
    if "image" in data:
        fields["image"] = MoleculeImage(decode_array(data["image"]["pixels"]), data["image"]["seed"])
    if "text" in data:
        fields["text"] = TextDescription(tuple(data["text"]["ids"]),
                                         tuple(tuple(s) for s in data["text"]["segments"]))
    if "conformer" in data:
        fields["conformer"] = Conformer(decode_array(data["conformer"]["coordinates"]), g,
                                        data["conformer"]["seed"])
    if "props" in data:
        fields["props"] = PropertyVector.from_array(data["props"])
    if "kg_id" in data:
        fields["kg_id"] = data["kg_id"]
    return MultimodalRecord(mol_id=data["mol_id"], smiles=data["smiles"], graph=g, **fields)


def _rules_to_json(rules: Dict[str, Dict[int, List[int]]]) -> Dict[str, Dict[str, List[int]]]:
    return {kind: {str(k): list(v) for k, v in table.items()} for kind, table in rules.items()}


def _rules_from_json(data: Dict[str, Dict[str, List[int]]]) -> Dict[str, Dict[int, List[int]]]:
    return {kind: {int(k): list(v) for k, v in table.items()} for kind, table in data.items()}


@dataclass
class Dataset:
    """Everything under one generated data directory"""
    molecules: List[Tuple[str, str]]
    records: List[MultimodalRecord]
    triples: List[KGTriple]
    patients: List[PatientHistory]
    ddi: DDIMatrix
    rules: Dict[str, Dict[int, List[int]]]
    vocab: EHRVocab

    def medication_records(self) -> List[MultimodalRecord]:
        """Medication j is record j"""
        return self.records[:self.vocab.n_medications]


def write_dataset(out_dir: PathLike, molecules: Sequence[Tuple[str, str]], records: Sequence[MultimodalRecord],
                  triples: Sequence[KGTriple], patients: Sequence[PatientHistory], ddi: DDIMatrix,
                  rules: Dict[str, Dict[int, List[int]]], vocab: EHRVocab) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_jsonl(out / "molecules.jsonl", ({"id": i, "smiles": s} for i, s in molecules))
    write_jsonl(out / "modalities.jsonl", (record_to_dict(r) for r in records))
    write_jsonl(out / "kg.jsonl", ({"head": t.head, "relation": t.relation, "tail": t.tail} for t in triples))
    write_jsonl(out / "ehr.jsonl", (p.to_dict() for p in patients))
    write_json(out / "ddi.json", ddi.to_dict())
    write_json(out / "rules.json", _rules_to_json(rules))
    write_json(out / "vocab.json", vocab.to_dict())
    logger.info(f"Wrote dataset ({len(records)} molecules, {len(patients)} patients) to {out}")
    return out


def check_dataset(data_dir: PathLike, files: Sequence[str] = DATASET_FILES):
    missing = [name for name in files if not (Path(data_dir) / name).exists()]
    if missing:
        raise ConfigError(f"dataset at {data_dir} is missing {missing}")


def load_records(data_dir: PathLike) -> List[MultimodalRecord]:
    check_dataset(data_dir, ("modalities.jsonl",))
    path = Path(data_dir) / "modalities.jsonl"
    rows = read_jsonl(path)
    with _malformed(path):
        return [record_from_dict(row) for row in rows]


def load_dataset(data_dir: PathLike) -> Dataset:
    """
    Read a dataset directory written by write_dataset

    Raises:
        ConfigError: a dataset file is missing or malformed
        VocabMismatch: an EHR index lies outside vocab.json
    """
    path = Path(data_dir)
    check_dataset(path)
    with _malformed(path / "vocab.json"):
        vocab = EHRVocab(**read_json(path / "vocab.json"))
    with _malformed(path / "ehr.jsonl"):
        patients = [PatientHistory.from_dict(row) for row in read_jsonl(path / "ehr.jsonl")]
    for p in patients:
        p.check(vocab)
    with _malformed(path / "molecules.jsonl"):
        molecules = [(row["id"], row["smiles"]) for row in read_jsonl(path / "molecules.jsonl")]
    with _malformed(path / "kg.jsonl"):
        triples = [KGTriple(row["head"], row["relation"], row["tail"]) for row in read_jsonl(path / "kg.jsonl")]
    with _malformed(path / "ddi.json"):
        ddi = DDIMatrix.from_dict(read_json(path / "ddi.json"))
    with _malformed(path / "rules.json"):
        rules = _rules_from_json(read_json(path / "rules.json"))
    dataset = Dataset(molecules=molecules, records=load_records(path), triples=triples, patients=patients,
                      ddi=ddi, rules=rules, vocab=vocab)
    logger.info(f"Loaded dataset from {path}: {len(dataset.records)} molecules, {len(patients)} patients")
    return dataset


def split_patients(patients: Sequence[PatientHistory], seed: int,
                   fractions: Optional[Tuple[float, float]] = None
                   ) -> Tuple[List[PatientHistory], List[PatientHistory], List[PatientHistory]]:
    """Seeded train/validation/test split by patient, 2/3, 1/6, 1/6 by default"""
    train_frac, val_frac = fractions or SPLIT_FRACTIONS
    ordered = sorted(patients, key=lambda p: p.patient_id)
    order = np.random.default_rng([seed, 7]).permutation(len(ordered))
    n_train = int(round(len(ordered) * train_frac))
    n_val = int(round(len(ordered) * val_frac))
    parts = (order[:n_train], order[n_train:n_train + n_val], order[n_train + n_val:])
    train, val, test = ([ordered[i] for i in idx] for idx in parts)
    return train, val, test
