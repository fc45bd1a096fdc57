"""Readers and writers for the package's delimited file formats.

All tables are comma-separated UTF-8 with a mandatory header row.  Formats:

* symptom CSV      -- ``id,<symptom...>`` rows, cells ``Y`` | ``N`` | ``.`` | empty
* labeled CSV      -- like symptom CSV but with a ``cause`` column after ``id``
* probbase CSV     -- ``symptom,<cause...>`` rows, cells drawn from the 15-grade alphabet
* alphabet CSV     -- ``grade,value`` rows in grade order
* physician CSV    -- ``death_id,physician_id,category`` rows
* cause-category CSV -- ``cause_id,category`` rows
* config file      -- ``key = value`` lines, ``#`` comments, keys mirror CLI flags
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    GRADE_LABELS,
    MISSING,
    NO,
    YES,
    LevelAlphabet,
    RankMatrix,
    SymptomDataset,
)
from .physician import DEFAULT_CATEGORIES, PhysicianCodes

__all__ = [
    "load_symptoms",
    "load_labeled",
    "load_probbase",
    "load_alphabet",
    "load_physician_codes",
    "load_cause_categories",
    "load_prior_csmf",
    "write_symptoms",
    "write_labeled",
    "write_probbase",
    "write_alphabet",
    "write_matrix_csv",
    "parse_config_file",
]

_CELL_TOKENS = {"Y": YES, "N": NO, ".": MISSING, "": MISSING}


def _read_rows(path) -> list[list[str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh)]
    if not rows:
        raise ValueError(f"{path}: empty file, expected a header row")
    return rows


def _parse_cells(rows, path, id_label) -> tuple[list[str], list[list[int]]]:
    header = rows[0]
    columns = header[1:]
    ids: list[str] = []
    seen: set[str] = set()
    values: list[list[int]] = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ValueError(
                f"{path}:{lineno}: ragged row, expected {len(header)} cells got {len(row)}"
            )
        rid = row[0]
        if rid in seen:
            raise ValueError(f"{path}:{lineno}: duplicate {id_label} {rid!r}")
        seen.add(rid)
        ids.append(rid)
        parsed = []
        for col, cell in zip(columns, row[1:]):
            token = cell.strip()
            if token not in _CELL_TOKENS:
                raise ValueError(
                    f"{path}:{lineno}: unknown cell token {cell!r} "
                    f"(row {rid!r}, column {col!r}); expected Y, N, . or empty"
                )
            parsed.append(_CELL_TOKENS[token])
        values.append(parsed)
    return ids, values


def load_symptoms(path) -> SymptomDataset:
    """Parse a symptom CSV into a validated SymptomDataset.

    A ``cause`` column directly after ``id`` (a labeled CSV) is tolerated and
    dropped so fit-style commands can consume simulator output directly.
    """
    rows = _read_rows(path)
    header = rows[0]
    if len(header) >= 2 and header[1] == "cause":
        rows = [[row[0]] + row[2:] for row in rows]
        header = rows[0]
    ids, values = _parse_cells(rows, path, "death id")
    n_cols = len(header) - 1
    data = np.asarray(values, dtype=np.int8).reshape(len(ids), n_cols)
    return SymptomDataset(tuple(ids), tuple(header[1:]), data)


def load_labeled(path) -> tuple[SymptomDataset, list[str]]:
    """Parse a labeled CSV (``id,cause,<symptoms...>``); returns (dataset, labels)."""
    rows = _read_rows(path)
    header = rows[0]
    if len(header) < 2 or header[1] != "cause":
        raise ValueError(f"{path}: labeled CSV requires a 'cause' column after 'id'")
    labels = [row[1] for row in rows[1:]]
    stripped = [[row[0]] + row[2:] for row in rows]
    ids, values = _parse_cells(stripped, path, "death id")
    n_cols = len(header) - 2
    data = np.asarray(values, dtype=np.int8).reshape(len(ids), n_cols)
    return SymptomDataset(tuple(ids), tuple(header[2:]), data), labels


def load_probbase(path) -> tuple[RankMatrix, LevelAlphabet]:
    """Parse a probbase CSV of letter grades into a RankMatrix.

    The accompanying LevelAlphabet carries the conventional default values;
    pass an alphabet CSV separately to override them.
    """
    rows = _read_rows(path)
    header = rows[0]
    causes = header[1:]
    if not causes:
        raise ValueError(f"{path}: probbase needs at least one cause column")
    alphabet = LevelAlphabet()
    grade_index = {g: i for i, g in enumerate(GRADE_LABELS)}
    symptoms = []
    grid = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ValueError(
                f"{path}:{lineno}: ragged row, expected {len(header)} cells got {len(row)}"
            )
        symptoms.append(row[0])
        parsed = []
        for col, cell in zip(causes, row[1:]):
            token = cell.strip()
            if token not in grade_index:
                raise ValueError(
                    f"{path}:{lineno}: unknown grade {cell!r} "
                    f"(symptom {row[0]!r}, cause {col!r})"
                )
            parsed.append(grade_index[token])
        grid.append(parsed)
    if len(set(symptoms)) != len(symptoms):
        raise ValueError(f"{path}: duplicate symptom ids in probbase")
    grade_of = np.asarray(grid, dtype=np.int64).reshape(len(symptoms), len(causes))
    return RankMatrix(grade_of, tuple(causes), tuple(symptoms)), alphabet


def load_alphabet(path) -> LevelAlphabet:
    """Parse a ``grade,value`` CSV into a LevelAlphabet (grade order enforced)."""
    rows = _read_rows(path)
    body = rows[1:]
    if [row[0] for row in body] != list(GRADE_LABELS):
        raise ValueError(f"{path}: alphabet rows must list the 15 grades in order")
    values = [float(row[1]) for row in body]
    return LevelAlphabet(GRADE_LABELS, tuple(values))


def load_cause_categories(path, causes, categories=DEFAULT_CATEGORIES) -> np.ndarray:
    """Build the cause x category membership matrix from a two-column CSV.

    A cause may appear under several categories.  The ``unknown`` category
    contains every cause; causes absent from the file belong only to it.
    """
    categories = list(categories)
    cat_index = {c: i for i, c in enumerate(categories)}
    cause_index = {c: i for i, c in enumerate(causes)}
    chi = np.zeros((len(causes), len(categories)), dtype=np.int8)
    rows = _read_rows(path)
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) < 2:
            raise ValueError(f"{path}:{lineno}: expected cause_id,category")
        cause, cat = row[0], row[1].strip()
        if cat not in cat_index:
            raise ValueError(f"{path}:{lineno}: unknown category {cat!r}")
        if cause not in cause_index:
            raise ValueError(f"{path}:{lineno}: unknown cause {cause!r}")
        chi[cause_index[cause], cat_index[cat]] = 1
    if "unknown" in cat_index:
        chi[:, cat_index["unknown"]] = 1
    empty = np.flatnonzero(chi.sum(axis=1) == 0)
    if empty.size:
        raise ValueError(
            f"{path}: causes with no category and no 'unknown' fallback: "
            f"{[causes[i] for i in empty]}"
        )
    return chi


def load_physician_codes(
    path,
    dataset: SymptomDataset,
    chi: np.ndarray,
    categories=DEFAULT_CATEGORIES,
) -> PhysicianCodes:
    """Parse ``death_id,physician_id,category`` rows into PhysicianCodes."""
    categories = tuple(categories)
    cat_index = {c: i for i, c in enumerate(categories)}
    death_index = {d: i for i, d in enumerate(dataset.death_ids)}
    raw: list[tuple[int, str, int]] = []
    rows = _read_rows(path)
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) < 3:
            raise ValueError(f"{path}:{lineno}: expected death_id,physician_id,category")
        death, phys, cat = row[0], row[1], row[2].strip()
        if death not in death_index:
            raise ValueError(f"{path}:{lineno}: death id {death!r} not in symptom data")
        if cat not in cat_index:
            raise ValueError(f"{path}:{lineno}: unknown category {cat!r}")
        raw.append((death_index[death], phys, cat_index[cat]))
    physician_ids = sorted({p for _, p, _ in raw})
    phys_index = {p: i for i, p in enumerate(physician_ids)}
    assignments = [(d, phys_index[p], g) for d, p, g in raw]
    return PhysicianCodes(
        categories=categories,
        physician_ids=tuple(physician_ids),
        assignments=tuple(assignments),
        n_deaths=dataset.n_deaths,
        chi=chi,
    )


def load_prior_csmf(path, causes) -> np.ndarray:
    """Parse a ``cause,value`` CSV into a normalized prior CSMF vector."""
    rows = _read_rows(path)
    values = {row[0]: float(row[1]) for row in rows[1:]}
    missing = [c for c in causes if c not in values]
    if missing:
        raise ValueError(f"{path}: prior CSMF missing causes {missing}")
    pi = np.asarray([values[c] for c in causes], dtype=float)
    if (pi < 0).any() or pi.sum() <= 0:
        raise ValueError(f"{path}: prior CSMF values must be nonnegative, not all zero")
    return pi / pi.sum()


_CELL_NAMES = {YES: "Y", NO: "N", MISSING: "."}


def write_symptoms(path, dataset: SymptomDataset) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", *dataset.symptoms])
        for rid, row in zip(dataset.death_ids, dataset.values):
            w.writerow([rid, *[_CELL_NAMES[v] for v in row]])


def write_labeled(path, dataset: SymptomDataset, labels) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "cause", *dataset.symptoms])
        for rid, label, row in zip(dataset.death_ids, labels, dataset.values):
            w.writerow([rid, label, *[_CELL_NAMES[v] for v in row]])


def write_probbase(path, rank: RankMatrix, symptoms=None) -> None:
    symptoms = symptoms if symptoms is not None else rank.symptoms
    if symptoms is None:
        symptoms = [f"s{i}" for i in range(rank.n_symptoms)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["symptom", *rank.causes])
        for sid, row in zip(symptoms, rank.grade_of):
            w.writerow([sid, *[GRADE_LABELS[g] for g in row]])


def write_alphabet(path, alphabet: LevelAlphabet) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["grade", "value"])
        for g, v in zip(alphabet.grades, alphabet.default_values):
            w.writerow([g, repr(float(v))])


def write_matrix_csv(path, header, row_ids, matrix, id_label="id") -> None:
    """Write a labelled numeric matrix; floats use shortest round-trip repr."""
    matrix = np.asarray(matrix)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([id_label, *header])
        for rid, row in zip(row_ids, matrix):
            w.writerow([rid, *[_fmt(v) for v in row]])


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        if np.isnan(v):
            return ""
        return repr(float(v))
    return str(v)


def parse_config_file(path) -> dict[str, str]:
    """Parse ``key = value`` lines; keys mirror CLI flag names without dashes."""
    out: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = stripped.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


@dataclass(frozen=True)
class RunConfig:
    """Resolved inputs for a fit-style run; every referenced path must exist."""

    symptoms_path: Path
    probbase_path: Path
    physician_path: Path | None = None
    category_map_path: Path | None = None
    alphabet_path: Path | None = None
    out_dir: Path = Path(".")
    prior_mode: str = "default"

    def __post_init__(self):
        for name in ("symptoms_path", "probbase_path", "physician_path",
                     "category_map_path", "alphabet_path"):
            p = getattr(self, name)
            if p is None:
                continue
            p = Path(p)
            object.__setattr__(self, name, p)
            if not p.exists():
                raise ValueError(f"{name.replace('_path', '')} file not found: {p}")
        object.__setattr__(self, "out_dir", Path(self.out_dir))
        if self.prior_mode not in ("default", "quantile"):
            raise ValueError(f"prior mode must be default or quantile, got {self.prior_mode!r}")
        if self.prior_mode == "quantile" and self.alphabet_path is None:
            raise ValueError("quantile prior mode requires an alphabet file")


def dataset_summary(dataset: SymptomDataset) -> str:
    n_missing = int((dataset.values == MISSING).sum())
    return (
        f"{dataset.n_deaths} deaths x {dataset.n_symptoms} symptoms "
        f"({n_missing} missing cells)"
    )


def check_dimensions(dataset: SymptomDataset, rank: RankMatrix) -> None:
    """Fail fast when symptom data and probbase disagree."""
    if rank.n_symptoms != dataset.n_symptoms:
        raise ValueError(
            f"probbase has {rank.n_symptoms} symptoms but data has {dataset.n_symptoms}"
        )
    if rank.symptoms is not None and tuple(rank.symptoms) != tuple(dataset.symptoms):
        raise ValueError("probbase symptom ids do not match symptom data columns")
