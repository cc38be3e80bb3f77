"""Annotation, threshold and model files.

Annotations are JSON lines, one image per line::

    {"image_id": "img001", "width": 640, "height": 480, "pose_mode": "full",
     "label": "riding-bike",
     "detections": [{"kind": "head", "x1": 300, "y1": 100, "x2": 300, "y2": 150,
                     "score": 1.7, "source": "detector"}, ...]}

``label`` may be null or omitted; every other key is required.

Model files are a single JSON document.  Parameter arrays are stored
row-major as lists of ``float.hex`` strings so a save/load round trip is
bit-exact, and a SHA-256 checksum over the canonical payload guards against
truncation and hand edits.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dbn import FORMAT_VERSION, DbnModel
from .errors import (CorruptFile, ParseError, UnknownEntityKind, UnknownLabel,
                     VersionMismatch)
from .evaluation import CLASS_NAMES
from .geometry import (ENTITY_INDEX, ENTITY_NAMES, POSE_MODES, SOURCES, CentralLine,
                       DetectionRecord, ImageAnnotation, ThresholdSet)
from .rbm import BinaryRbm, GaussianRbm

LABEL_INDEX = {name: i for i, name in enumerate(CLASS_NAMES)}
MODEL_FORMAT = "stillact-dbn"

_ANNOTATION_KEYS = {"image_id", "width", "height", "pose_mode", "detections"}
_DETECTION_KEYS = ("kind", "x1", "y1", "x2", "y2", "score", "source")


def _number(value, what, line, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(line, f"{what} must be a number, got {value!r}", path)
    value = float(value)
    if not math.isfinite(value):
        raise ParseError(line, f"{what} must be finite", path)
    return value


def parse_annotation(obj, line: int = 0, path=None) -> ImageAnnotation:
    if not isinstance(obj, dict):
        raise ParseError(line, "expected a JSON object", path)
    missing = _ANNOTATION_KEYS - set(obj)
    if missing:
        raise ParseError(line, f"missing keys {sorted(missing)}", path)
    image_id = obj["image_id"]
    if not isinstance(image_id, str):
        raise ParseError(line, "image_id must be a string", path)
    if obj["pose_mode"] not in POSE_MODES:
        raise ParseError(line, f"pose_mode must be one of {POSE_MODES}", path)
    label = obj.get("label")
    if label is not None:
        if label not in LABEL_INDEX:
            raise UnknownLabel(line, f"unknown action label {label!r}", path)
        label = LABEL_INDEX[label]
    if not isinstance(obj["detections"], list):
        raise ParseError(line, "detections must be a list", path)
    dets = []
    for d in obj["detections"]:
        if not isinstance(d, dict):
            raise ParseError(line, "each detection must be an object", path)
        absent = [k for k in _DETECTION_KEYS if k not in d]
        if absent:
            raise ParseError(line, f"detection missing keys {absent}", path)
        if d["kind"] not in ENTITY_INDEX:
            raise UnknownEntityKind(line, f"unknown entity kind {d['kind']!r}", path)
        if d["source"] not in SOURCES:
            raise ParseError(line, f"source must be one of {SOURCES}", path)
        coords = [_number(d[k], k, line, path) for k in ("x1", "y1", "x2", "y2")]
        dets.append(DetectionRecord(d["kind"], CentralLine(*coords),
                                    _number(d["score"], "score", line, path), d["source"]))
    return ImageAnnotation(image_id, _number(obj["width"], "width", line, path),
                           _number(obj["height"], "height", line, path), tuple(dets),
                           label, obj["pose_mode"])


def annotation_to_dict(a: ImageAnnotation) -> dict:
    return {
        "image_id": a.image_id,
        "width": a.width,
        "height": a.height,
        "pose_mode": a.pose_mode,
        "label": None if a.label is None else CLASS_NAMES[a.label],
        "detections": [
            {"kind": d.kind, "x1": d.line.x1, "y1": d.line.y1, "x2": d.line.x2,
             "y2": d.line.y2, "score": d.score, "source": d.source}
            for d in a.detections
        ],
    }


def load_annotations(path) -> list[ImageAnnotation]:
    path = Path(path)
    out = []
    with path.open(encoding="utf-8") as fh:
        for lineno, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ParseError(lineno, f"invalid JSON ({exc.msg})", path) from None
            out.append(parse_annotation(obj, lineno, path))
    return out


def dumps_annotations(annotations: Iterable[ImageAnnotation]) -> str:
    return "".join(json.dumps(annotation_to_dict(a)) + "\n" for a in annotations)


def save_annotations(annotations: Iterable[ImageAnnotation], path) -> None:
    Path(path).write_text(dumps_annotations(annotations), encoding="utf-8")


# --- thresholds ---------------------------------------------------------------

def save_thresholds(thresholds: ThresholdSet, path, **extra) -> None:
    doc = {"thresholds": {k: thresholds[k] for k in ENTITY_NAMES}, **extra}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_thresholds(path) -> ThresholdSet:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        values = doc["thresholds"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise CorruptFile(f"{path}: not a threshold file ({exc})") from None
    return ThresholdSet({k: float(v) for k, v in values.items()})


# --- models -------------------------------------------------------------------

def _encode_array(a: np.ndarray) -> dict:
    a = np.asarray(a, dtype=np.float64)
    return {"shape": list(a.shape), "hex": [float(x).hex() for x in a.ravel().tolist()]}


def _decode_array(obj) -> np.ndarray:
    flat = np.array([float.fromhex(x) for x in obj["hex"]], dtype=np.float64)
    return flat.reshape(obj["shape"])


def _checksum(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def model_to_document(model: DbnModel) -> dict:
    payload = {
        "format": MODEL_FORMAT,
        "format_version": FORMAT_VERSION,
        "layers": list(model.layers),
        "sigma": float(model.layer1.sigma).hex(),
        "params": {
            "layer1.W": _encode_array(model.layer1.W),
            "layer1.b": _encode_array(model.layer1.b),
            "layer1.c": _encode_array(model.layer1.c),
            "layer2.W": _encode_array(model.layer2.W),
            "layer2.b": _encode_array(model.layer2.b),
            "layer2.c": _encode_array(model.layer2.c),
            "softmax.W": _encode_array(model.W3),
            "softmax.b": _encode_array(model.b3),
        },
        "metadata": model.metadata,
    }
    return {**payload, "checksum": _checksum(payload)}


def model_from_document(doc) -> DbnModel:
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise CorruptFile("not a stillact model document")
    if doc.get("format_version") != FORMAT_VERSION:
        raise VersionMismatch(doc.get("format_version"), FORMAT_VERSION)
    payload = {k: v for k, v in doc.items() if k != "checksum"}
    if doc.get("checksum") != _checksum(payload):
        raise CorruptFile("model checksum does not match its contents")
    try:
        p = {k: _decode_array(v) for k, v in doc["params"].items()}
        layer1 = GaussianRbm(p["layer1.W"], p["layer1.b"], p["layer1.c"], float.fromhex(doc["sigma"]))
        layer2 = BinaryRbm(p["layer2.W"], p["layer2.b"], p["layer2.c"])
        model = DbnModel(layer1, layer2, p["softmax.W"], p["softmax.b"], doc.get("metadata", {}))
    except (KeyError, ValueError, TypeError) as exc:
        raise CorruptFile(f"malformed model parameters ({exc})") from None
    if list(model.layers) != doc.get("layers"):
        raise CorruptFile(f"declared layers {doc.get('layers')} do not match arrays {model.layers}")
    return model


def dumps_model(model: DbnModel) -> str:
    return json.dumps(model_to_document(model), indent=1, sort_keys=True) + "\n"


def save_model(model: DbnModel, path) -> None:
    Path(path).write_text(dumps_model(model), encoding="utf-8")


def load_model(path) -> DbnModel:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptFile(f"{path}: unreadable model file ({exc.msg})") from None
    return model_from_document(doc)


# --- feature vectors ------------------------------------------------------------

def dumps_features(image_ids: Sequence[str], X: np.ndarray, labels: Sequence) -> str:
    lines = []
    for image_id, row, label in zip(image_ids, X, labels):
        lines.append(json.dumps({
            "image_id": image_id,
            "label": None if label is None else CLASS_NAMES[label],
            "features": [float(v) for v in row],
        }))
    return "".join(line + "\n" for line in lines)
