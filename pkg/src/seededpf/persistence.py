"""Versioned model files.

A model file is an uncompressed zip readable with ``numpy.load``: one
``.npy`` member per array plus ``header.json`` holding dimensions, priors,
the seed lexicon (as term strings), the vocabulary, document ids and training
metadata.  Member timestamps are fixed, so identical models give identical
bytes, and float arrays are stored raw, so values round-trip exactly.
"""
import io
import json
import zipfile

import numpy as np

from .model import ModelSpec, PriorConfig, SeedLexicon, VariationalParams
from .posterior import posterior_means
from .textprep import Vocabulary

FORMAT = "seededpf-model"
FORMAT_VERSION = 1
_EPOCH = (1980, 1, 1, 0, 0, 0)


class ModelFormatError(ValueError):
    pass


def _write_member(zf, name, data):
    info = zipfile.ZipInfo(name, date_time=_EPOCH)
    info.compress_type = zipfile.ZIP_STORED
    info.external_attr = 0o644 << 16
    zf.writestr(info, data)


def save_model(path, model):
    """Write a :class:`~seededpf.posterior.FittedModel` to ``path``."""
    spec = model.spec
    lex = spec.lexicon
    vocab = model.vocabulary
    header = {
        "format": FORMAT,
        "version": FORMAT_VERSION,
        "D": spec.D,
        "V": spec.V,
        "K": spec.K,
        "priors": {k: getattr(spec.priors, k) for k in "abcdef"},
        "topics": [
            {"name": name, "seed_ids": list(lex.seeds[k]),
             "seed_words": [vocab.terms[v] for v in lex.seeds[k]] if vocab is not None else None}
            for k, name in enumerate(lex.topic_names)
        ],
        "vocabulary": vocab.terms if vocab is not None else None,
        "doc_ids": list(model.doc_ids) if model.doc_ids is not None else None,
        "length_normalized": bool(model.length_normalized),
        "metadata": model.metadata,
    }
    arrays = {name: getattr(model.params, name) for name in VariationalParams.NAMES}
    if model.doc_lengths is not None:
        arrays["doc_lengths"] = np.asarray(model.doc_lengths, dtype=np.int64)
    with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
        _write_member(zf, "header.json", json.dumps(header, sort_keys=True, indent=1).encode("utf-8"))
        for name, arr in arrays.items():
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.ascontiguousarray(arr), allow_pickle=False)
            _write_member(zf, name + ".npy", buf.getvalue())


def load_model(path):
    """Read a model file back into a :class:`~seededpf.posterior.FittedModel`."""
    try:
        zf = zipfile.ZipFile(path)
    except zipfile.BadZipFile:
        raise ModelFormatError(f"{path}: not a model file") from None
    with zf:
        try:
            header = json.loads(zf.read("header.json"))
        except KeyError:
            raise ModelFormatError(f"{path}: not a model file (no header)") from None
        if header.get("format") != FORMAT:
            raise ModelFormatError(f"{path}: unknown format {header.get('format')!r}")
        if header.get("version") != FORMAT_VERSION:
            raise ModelFormatError(f"{path}: unsupported version {header.get('version')}")

        def read(name):
            return np.lib.format.read_array(io.BytesIO(zf.read(name + ".npy")), allow_pickle=False)

        params = VariationalParams(*(read(n) for n in VariationalParams.NAMES))
        lengths = read("doc_lengths") if "doc_lengths.npy" in zf.namelist() else None
    vocab = Vocabulary(header["vocabulary"]) if header["vocabulary"] is not None else None
    topics = header["topics"]
    lexicon = SeedLexicon([t["name"] for t in topics], [t["seed_ids"] for t in topics], vocab)
    spec = ModelSpec(header["D"], header["V"], header["K"], PriorConfig(**header["priors"]), lexicon)

    return posterior_means(params, spec, vocabulary=vocab, metadata=header["metadata"],
                           length_normalized=header["length_normalized"], doc_lengths=lengths,
                           doc_ids=header["doc_ids"])
