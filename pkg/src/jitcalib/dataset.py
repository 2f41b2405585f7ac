"""Loading commit datasets and prediction exports, and cross-validation folds.

Two file kinds are understood:

* commit datasets: CSV with a header, one commit per row, a label column
  (``bug`` or ``label``) and at least the ``la`` (lines added) metric;
* prediction exports: CSV or JSON lines with ``prob`` and ``true_label`` and
  optionally ``id`` and ``logit``. Any other columns are kept verbatim in
  :attr:`PredictionSet.meta`.
"""

import contextlib
import csv
import hashlib
import io
import json
import math
import os
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from ._validation import THRESHOLD, logit, sigmoid
from .exceptions import ConfigurationError, ParseError, SchemaError, ValidationError

LABEL_COLUMNS = ("bug", "label")
ID_COLUMNS = ("id", "commit_id", "commit_hash", "commit")
LOGIT_TOLERANCE = 1e-6

_BOOLEANS = {"true": 1.0, "false": 0.0}


@dataclass(frozen=True)
class LabeledInstance:
    id: str
    features: Mapping[str, float]
    label: int


@dataclass(frozen=True)
class PredictionRecord:
    id: Optional[str]
    logit: float
    prob: float
    pred_label: int
    true_label: int


@dataclass(frozen=True, eq=False)
class PredictionSet:
    """Column-oriented container of classifier outputs.

    Iterating yields :class:`PredictionRecord` objects; the arrays are what
    the metric and calibration code consume.
    """

    prob: np.ndarray
    true_label: np.ndarray
    logit: np.ndarray
    ids: Optional[tuple] = None
    threshold: float = THRESHOLD
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        prob = np.asarray(self.prob, dtype=float)
        y = np.asarray(self.true_label, dtype=np.int64)
        q = np.asarray(self.logit, dtype=float)
        if not (prob.shape == y.shape == q.shape) or prob.ndim != 1:
            raise ValidationError("prob, logit and true_label must be 1-d arrays of equal length")
        if self.ids is not None and len(self.ids) != prob.size:
            raise ValidationError("ids must have one entry per prediction")
        for arr in (prob, y, q):
            arr.flags.writeable = False
        object.__setattr__(self, "prob", prob)
        object.__setattr__(self, "true_label", y)
        object.__setattr__(self, "logit", q)

    @classmethod
    def from_probs(cls, prob, true_label, ids=None, **kw):
        prob = np.asarray(prob, dtype=float)
        return cls(prob=prob, true_label=true_label, logit=logit(prob), ids=_tuple(ids), **kw)

    @classmethod
    def from_logits(cls, logits, true_label, ids=None, **kw):
        q = np.asarray(logits, dtype=float)
        return cls(prob=sigmoid(q), true_label=true_label, logit=q, ids=_tuple(ids), **kw)

    @property
    def pred_label(self):
        return (self.prob >= self.threshold).astype(np.int64)

    def __len__(self):
        return self.prob.size

    def __iter__(self):
        pred = self.pred_label
        for i in range(len(self)):
            yield PredictionRecord(
                id=None if self.ids is None else self.ids[i],
                logit=float(self.logit[i]),
                prob=float(self.prob[i]),
                pred_label=int(pred[i]),
                true_label=int(self.true_label[i]),
            )

    def subset(self, index):
        index = np.asarray(index)
        if index.dtype == bool:
            index = np.flatnonzero(index)
        ids = None if self.ids is None else tuple(self.ids[i] for i in index)
        meta = {k: [v[i] for i in index] for k, v in self.meta.items()}
        return PredictionSet(self.prob[index], self.true_label[index], self.logit[index],
                             ids=ids, threshold=self.threshold, meta=meta)

    def with_logits(self, logits):
        """Same records with new logits (and the matching probabilities)."""
        q = np.asarray(logits, dtype=float)
        return PredictionSet(sigmoid(q), self.true_label, q, ids=self.ids,
                             threshold=self.threshold, meta=self.meta)


def _tuple(ids):
    return None if ids is None else tuple(str(i) for i in ids)


@contextlib.contextmanager
def _text_source(source):
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="", encoding="utf-8") as fh:
            yield fh
    elif isinstance(source, (bytes, bytearray)):
        yield io.StringIO(bytes(source).decode("utf-8"), newline="")
    elif isinstance(source, io.TextIOBase):
        yield source
    else:
        # binary file-like
        wrapper = io.TextIOWrapper(source, encoding="utf-8", newline="")
        try:
            yield wrapper
        finally:
            wrapper.detach()


def _number(text, row, column):
    s = text.strip()
    if s.lower() in _BOOLEANS:
        return _BOOLEANS[s.lower()]
    try:
        value = float(s)
    except ValueError:
        raise ParseError(row, f"column {column!r}: non-numeric value {text!r}") from None
    if not math.isfinite(value):
        raise ParseError(row, f"column {column!r}: non-finite value {text!r}")
    return value


def load_commits(source, format="csv", *, exclude=()):
    """Read a commit-metric dataset.

    ``source`` is a path, bytes, or a text/binary file object. Columns listed
    in ``exclude`` (dates, author names...) are skipped; every other non-id,
    non-label column must be numeric.
    """
    if format != "csv":
        raise ConfigurationError(f"unsupported commit format: {format!r}")
    with _text_source(source) as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError("la", "empty file: no header row") from None
        label_col = next((c for c in LABEL_COLUMNS if c in header), None)
        if label_col is None:
            raise SchemaError("bug", "missing label column: expected 'bug' or 'label'")
        if "la" not in header:
            raise SchemaError("la")
        id_col = next((c for c in ID_COLUMNS if c in header), None)
        skip = set(exclude) | {label_col, id_col}
        features = [(j, h) for j, h in enumerate(header) if h not in skip]
        label_j = header.index(label_col)
        id_j = None if id_col is None else header.index(id_col)

        out = []
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(row_no, f"expected {len(header)} fields, got {len(row)}")
            label = _number(row[label_j], row_no, label_col)
            if label not in (0.0, 1.0):
                raise ValidationError(f"row {row_no}: label must be 0 or 1, got {row[label_j]!r}")
            feats = {h: _number(row[j], row_no, h) for j, h in features}
            if feats["la"] < 0:
                raise ValidationError(f"row {row_no}: 'la' must be nonnegative")
            cid = row[id_j] if id_j is not None else str(row_no - 1)
            out.append(LabeledInstance(id=cid, features=feats, label=int(label)))
    return out


def feature_matrix(instances: Sequence[LabeledInstance], features: Sequence[str]):
    """Stack the named features into an (n, len(features)) array plus labels."""
    X = np.empty((len(instances), len(features)), dtype=float)
    for i, inst in enumerate(instances):
        for j, name in enumerate(features):
            try:
                X[i, j] = inst.features[name]
            except KeyError:
                raise SchemaError(name, f"instance {inst.id!r} lacks feature {name!r}") from None
    y = np.fromiter((inst.label for inst in instances), dtype=np.int64, count=len(instances))
    return X, y


def _prediction_row(obj, row_no):
    def get(key):
        v = obj.get(key)
        return None if v is None or (isinstance(v, str) and v.strip() == "") else v

    prob, q, label = get("prob"), get("logit"), get("true_label")
    if label is None:
        raise ParseError(row_no, "missing 'true_label'")
    if prob is None and q is None:
        raise ParseError(row_no, "missing 'prob'")
    label = _number(str(label), row_no, "true_label")
    if label not in (0.0, 1.0):
        raise ValidationError(f"row {row_no}: true_label must be 0 or 1, got {obj.get('true_label')!r}")
    if q is not None:
        q = _number(str(q), row_no, "logit")
    if prob is not None:
        prob = _number(str(prob), row_no, "prob")
        if not 0.0 <= prob <= 1.0:
            raise ValidationError(f"row {row_no}: prob must lie in [0, 1], got {prob!r}")
        if q is None:
            q = float(logit(prob))
        elif abs(float(sigmoid(q)) - prob) > LOGIT_TOLERANCE:
            raise ValidationError(f"row {row_no}: logit {q!r} inconsistent with prob {prob!r}")
    else:
        prob = float(sigmoid(q))
    return prob, q, int(label)


def load_predictions(source, format="csv", threshold=THRESHOLD):
    """Read a prediction export into a :class:`PredictionSet`."""
    with _text_source(source) as fh:
        if format == "csv":
            reader = csv.DictReader(fh)
            fieldnames = reader.fieldnames or []
            if fieldnames and "true_label" not in fieldnames:
                raise SchemaError("true_label")
            if fieldnames and "prob" not in fieldnames and "logit" not in fieldnames:
                raise SchemaError("prob")
            rows = []
            for row_no, obj in enumerate(reader, start=1):
                if None in obj or any(v is None for v in obj.values()):
                    raise ParseError(row_no, f"expected {len(fieldnames)} fields")
                rows.append(obj)
        elif format in ("jsonl", "json-lines"):
            rows = []
            for row_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ParseError(row_no, f"malformed JSON: {exc.msg}") from None
                if not isinstance(obj, dict):
                    raise ParseError(row_no, "expected a JSON object")
                rows.append(obj)
        else:
            raise ConfigurationError(f"unsupported prediction format: {format!r}")

    probs, logits, labels, ids = [], [], [], []
    extra_keys = []
    for obj in rows:
        for k in obj:
            if k not in ("prob", "logit", "true_label", "id") and k not in extra_keys:
                extra_keys.append(k)
    meta = {k: [] for k in extra_keys}
    have_ids = bool(rows) and all(obj.get("id") not in (None, "") for obj in rows)
    for row_no, obj in enumerate(rows, start=1):
        p, q, y = _prediction_row(obj, row_no)
        probs.append(p)
        logits.append(q)
        labels.append(y)
        if have_ids:
            ids.append(str(obj["id"]))
        for k in extra_keys:
            v = obj.get(k)
            meta[k].append("" if v is None else str(v))
    return PredictionSet(
        prob=np.array(probs, dtype=float),
        true_label=np.array(labels, dtype=np.int64),
        logit=np.array(logits, dtype=float),
        ids=tuple(ids) if have_ids else None,
        threshold=threshold,
        meta=meta,
    )


def dump_predictions(predictions: PredictionSet, dest, format="csv"):
    """Write predictions so that :func:`load_predictions` reads them back exactly."""
    columns = (["id"] if predictions.ids is not None else []) + ["logit", "prob", "true_label"]
    columns += list(predictions.meta)
    own = dest is None or isinstance(dest, (str, os.PathLike))
    fh = io.StringIO() if dest is None else (open(dest, "w", newline="", encoding="utf-8") if own else dest)
    try:
        records = list(predictions)
        for i, rec in enumerate(records):
            row = {"logit": rec.logit, "prob": rec.prob, "true_label": rec.true_label}
            if predictions.ids is not None:
                row["id"] = rec.id
            for k, v in predictions.meta.items():
                row[k] = v[i]
            records[i] = row
        if format == "csv":
            writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
            writer.writeheader()
            for row in records:
                writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
        elif format in ("jsonl", "json-lines"):
            for row in records:
                fh.write(json.dumps({k: row[k] for k in columns}) + "\n")
        else:
            raise ConfigurationError(f"unsupported prediction format: {format!r}")
        if dest is None:
            return fh.getvalue()
    finally:
        if own and dest is not None:
            fh.close()


@dataclass(frozen=True, eq=False)
class FoldPlan:
    k: int
    seed: int
    assignments: np.ndarray

    def folds(self):
        """Index arrays, one per fold, each sorted ascending."""
        return [np.flatnonzero(self.assignments == f) for f in range(self.k)]

    def digest(self):
        return hashlib.sha256(self.assignments.astype("<i8").tobytes()).hexdigest()[:16]


def split_folds(n, k=10, seed=0, stratify=None):
    """Shuffle ``range(n)`` with a seeded generator and cut it into ``k`` folds.

    Unstratified by default. Passing the label vector as ``stratify`` deals
    each class round-robin instead; fold sizes still differ by at most one.
    """
    if k < 2:
        raise ConfigurationError(f"fold count must be at least 2, got {k}")
    if n < k:
        raise ConfigurationError(f"cannot split {n} instances into {k} folds")
    rng = np.random.default_rng(seed)
    assignments = np.empty(n, dtype=np.int64)
    if stratify is None:
        perm = rng.permutation(n)
        for f, chunk in enumerate(np.array_split(perm, k)):
            assignments[chunk] = f
    else:
        y = np.asarray(stratify)
        if y.shape != (n,):
            raise ConfigurationError("stratify must have one label per instance")
        order = np.concatenate([rng.permutation(np.flatnonzero(y == c)) for c in np.unique(y)])
        assignments[order] = np.arange(n) % k
    assignments.flags.writeable = False
    return FoldPlan(k=k, seed=seed, assignments=assignments)
