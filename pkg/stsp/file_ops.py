"""Reading and writing stsp artifacts: sparse trait CSVs, JSON manifests and
parameter files, plot-ready result tables and text corpora.

Tables go through astropy.table so every CSV has a plain header line and
UTF-8, LF-terminated rows.
"""
import os
import json
import collections

import numpy as np
from astropy.io import ascii
from astropy.table import Table

from stsp import log
from stsp.stsp_core import TraitDataset
from stsp.sysexit import ConfigurationError

# -----------------------------------------------------------------------------

DATASET_COLUMNS = ("obs_id", "trait_id", "score")
CORPUS_COLUMNS = ("doc_id", "class", "token", "count")

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1

# -----------------------------------------------------------------------------


def ensure_output_dir(path):
    """Create directory `path` if needed and verify it is writable."""
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise ConfigurationError(f"cannot create output directory {path!r}: {exc}") from exc
    if not os.access(path, os.W_OK):
        raise ConfigurationError(f"output directory {path!r} is not writable")
    return path


def _read_table(path, columns, string_columns=()):
    if not os.path.exists(path):
        raise ConfigurationError(f"input file {path!r} does not exist")
    with open(path, encoding="utf-8") as handle:
        lines = [line for line in handle if line.strip()]
    if not lines:
        raise ConfigurationError(f"{path!r} is empty; expected header {','.join(columns)}")
    header = [name.strip() for name in lines[0].strip().split(",")]
    missing = [name for name in columns if name not in header]
    if missing:
        raise ConfigurationError(f"{path!r} lacks columns {missing}; expected header {','.join(columns)}")
    if len(lines) == 1:
        return None
    converters = {name: [ascii.convert_numpy(str)] for name in string_columns}
    try:
        return ascii.read(path, format="csv", converters=converters)
    except Exception as exc:
        raise ConfigurationError(f"cannot parse {path!r}: {exc}") from exc


def _write_table(table, path):
    table.write(path, format="ascii.csv", overwrite=True)
    log.verbose("Wrote", len(table), "rows to", repr(path), verbosity=55)
    return path


# -----------------------------------------------------------------------------


def write_dataset_csv(data, path):
    """Write `data` as the sparse CSV `obs_id,trait_id,score`, one row per nonzero entry."""
    score_dtype = float if data.score_kind == "real" else np.int64
    table = Table(
        [
            np.asarray(data.obs, dtype=np.int64),
            np.array([data.trait_ids[j] for j in data.trait_index.tolist()], dtype=str),
            np.asarray(data.score, dtype=score_dtype),
        ],
        names=DATASET_COLUMNS,
        dtype=(np.int64, str, score_dtype),
    )
    return _write_table(table, path)


def read_dataset_csv(path, n_obs=None, score_kind=None, atom_params=None):
    """Read a sparse trait CSV back into a TraitDataset.

    Parameters
    ----------
    path : str
    n_obs : int, optional
        Number of observations.  Rows without traits leave no line in the
        CSV, so this comes from the "datasets" entry for `path` in the
        manifest next to it when present, otherwise from the largest obs_id.
    score_kind : str, optional
        Inferred when omitted: "real" if any score is non-integral, else "count".
    atom_params : dict, optional
        trait id -> η for spike-and-slab data.
    """
    table = _read_table(path, DATASET_COLUMNS, string_columns=("trait_id",))
    if n_obs is None:
        n_obs = manifest_n_obs(path)
    if table is None:
        return TraitDataset.empty(n_obs or 0, score_kind or "count")
    obs = np.asarray(table["obs_id"], dtype=np.int64)
    scores = np.asarray(table["score"], dtype=float)
    if score_kind is None:
        score_kind = "count" if np.all(scores == np.round(scores)) else "real"
    if score_kind != "real":
        scores = scores.astype(np.int64)
    if n_obs is None:
        n_obs = int(obs.max()) + 1 if len(obs) else 0
    triples = zip(obs.tolist(), [str(tid) for tid in table["trait_id"]], scores.tolist())
    return TraitDataset.from_triples(n_obs, triples, score_kind, atom_params)


def write_table_csv(columns, path):
    """Write an ordered mapping of column name -> values as CSV."""
    return _write_table(Table(list(columns.values()), names=list(columns)), path)


def read_table_csv(path, columns=()):
    """Read a CSV written by write_table_csv into an astropy Table."""
    table = _read_table(path, columns)
    return Table(names=columns) if table is None else table


# -----------------------------------------------------------------------------


def write_json(obj, path):
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(obj, handle, indent=2, sort_keys=False)
        handle.write("\n")
    return path


def read_json(path):
    try:
        with open(path, encoding="utf-8") as handle:
            return json.load(handle)
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path!r}: {exc}") from exc
    except ValueError as exc:
        raise ConfigurationError(f"{path!r} is not valid JSON: {exc}") from exc


def read_params(path):
    """Read a JSON parameter file: a flat object of parameter name -> number,
    or a fit result whose "params" member holds them."""
    values = read_json(path)
    if isinstance(values, dict) and isinstance(values.get("params"), dict):
        values = values["params"]
    if not isinstance(values, dict) or not all(isinstance(v, (int, float)) for v in values.values()):
        raise ConfigurationError(f"{path!r} must map parameter names to numbers")
    return {str(name): float(value) for name, value in values.items()}


def write_manifest(output_dir, manifest):
    """Write `manifest` (with its version field) as manifest.json in `output_dir`."""
    body = dict(version=MANIFEST_VERSION)
    body.update(manifest)
    return write_json(body, os.path.join(output_dir, MANIFEST_NAME))


def manifest_n_obs(dataset_path):
    """The row count a manifest next to `dataset_path` records for that file
    under "datasets", or None.  Manifests of runs that only read the file
    carry no entry for it."""
    path = os.path.join(os.path.dirname(os.path.abspath(dataset_path)), MANIFEST_NAME)
    if not os.path.exists(path):
        return None
    datasets = read_json(path).get("datasets")
    if not isinstance(datasets, dict):
        return None
    n_obs = datasets.get(os.path.basename(dataset_path))
    return None if n_obs is None else int(n_obs)


# -----------------------------------------------------------------------------


def read_corpus_dir(path):
    """Read a directory-per-class corpus: every file under `path/<label>/` is one
    UTF-8 document of class <label>.

    Returns
    -------
    list of (label, text)
    """
    if not os.path.isdir(path):
        raise ConfigurationError(f"corpus directory {path!r} does not exist")
    docs = []
    for label in sorted(os.listdir(path)):
        class_dir = os.path.join(path, label)
        if not os.path.isdir(class_dir):
            continue
        for name in sorted(os.listdir(class_dir)):
            filepath = os.path.join(class_dir, name)
            if os.path.isfile(filepath):
                with open(filepath, encoding="utf-8", errors="replace") as handle:
                    docs.append((label, handle.read()))
    if not docs:
        raise ConfigurationError(f"corpus directory {path!r} holds no class subdirectories with documents")
    return docs


def read_corpus_csv(path):
    """Read the sparse corpus CSV `doc_id,class,token,count`.

    Returns
    -------
    list of (label, {token: count}), documents in order of first appearance.
    """
    table = _read_table(path, CORPUS_COLUMNS, string_columns=("doc_id", "class", "token"))
    if table is None:
        raise ConfigurationError(f"corpus {path!r} holds no documents")
    labels = {}
    bags = collections.OrderedDict()
    for doc_id, label, token, count in zip(table["doc_id"], table["class"], table["token"], table["count"]):
        doc_id = str(doc_id)
        if labels.setdefault(doc_id, str(label)) != str(label):
            raise ConfigurationError(f"document {doc_id!r} is listed under two classes in {path!r}")
        bag = bags.setdefault(doc_id, {})
        bag[str(token)] = bag.get(str(token), 0) + int(count)
    return [(labels[doc_id], bag) for doc_id, bag in bags.items()]


def read_corpus(path):
    """Read a corpus from a class-per-directory tree or a sparse CSV file."""
    if os.path.isdir(path):
        return read_corpus_dir(path)
    return read_corpus_csv(path)
