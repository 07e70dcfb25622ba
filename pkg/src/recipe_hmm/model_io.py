"""Versioned text serialization for trained models.

Grammar (one record per line, fields separated by a TAB)::

    recipe-hmm-model  <version>
    family            first | second | feature | pipeline
    meta              <key> <value>            (zero or more)
    dims              N <n> K <k> M <m> P <p>
    inventory         <name> <count>           followed by <count> lines, one symbol each
    table | counts    <name> <d1> [<d2> ...]   followed by prod(d1..d_{n-1}) lines
                                               of d_n row-major values
    end

Inventories are ``states``, ``tags`` (feature family only), ``words`` and
``prefixes``.  Probabilities are written with 17 significant digits so that
loading reproduces every float bit for bit; counts are integers.

A pipeline document holds ``config`` records, then ``section layer1`` and
``section layer2`` each followed by a complete nested model document, then
``end``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .corpus import Lexicon
from .tables import FeatureConditionedModel, FirstOrderModel, PrefixTable, SecondOrderModel

MAGIC = "recipe-hmm-model"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    pass


class ModelVersionError(ModelFormatError):
    pass


class TruncatedModelError(ModelFormatError):
    pass


class DimensionMismatchError(ModelFormatError):
    pass


_LAYOUT = {
    "first": {
        "tables": ("pi", "trans", "emit", "prefix_emit"),
        "counts": ("start", "trans", "emit"),
    },
    "second": {
        "tables": ("pi", "trans", "trans3", "emit", "emit2", "prefix_emit", "prefix_emit2"),
        "counts": ("start", "trans", "emit", "trans3", "emit2"),
    },
    "feature": {
        "tables": ("pi", "trans_f", "emit_f", "prefix_emit_f"),
        "counts": ("start", "trans_f", "emit_f"),
    },
}


def _expected_shape(name, n, k, m, p):
    return {
        "pi": (n,), "start": (n,), "trans": (n, n), "trans3": (n, n, n),
        "emit": (n, m), "emit2": (n, n, m), "prefix_emit": (n, p), "prefix_emit2": (n, n, p),
        "trans_f": (k, n, n), "emit_f": (k, n, m), "prefix_emit_f": (k, n, p),
    }[name]


def _fmt(x):
    return "%.17g" % x


def _write_array(out, kind, name, arr):
    arr = np.asarray(arr)
    out.append("\t".join([kind, name] + [str(d) for d in arr.shape]))
    fmt = str if kind == "counts" else _fmt
    for row in arr.reshape(-1, arr.shape[-1]):
        out.append("\t".join(fmt(v) for v in row))


def _dump_table_model(model, out):
    family = model.family
    n = model.n_states
    k = model.n_tags if family == "feature" else 0
    out.append(f"{MAGIC}\t{FORMAT_VERSION}")
    out.append(f"family\t{family}")
    if family != "feature":
        out.append(f"meta\tobs_field\t{model.obs_field}")
        out.append(f"meta\tstate_field\t{model.state_field}")
    out.append(f"meta\tsmoothing\t{_fmt(model.smoothing)}")
    prefixes = model.lexicon.prefixes
    out.append(f"dims\tN\t{n}\tK\t{k}\tM\t{model.n_words}\tP\t{len(prefixes)}")
    inventories = [("states", model.states)]
    if family == "feature":
        inventories.append(("tags", model.tags))
    inventories += [("words", model.lexicon.words), ("prefixes", prefixes)]
    for name, items in inventories:
        out.append(f"inventory\t{name}\t{len(items)}")
        out.extend(items)
    for name in _LAYOUT[family]["tables"]:
        value = getattr(model, name)
        _write_array(out, "table", name, value.table if isinstance(value, PrefixTable) else value)
    for name in _LAYOUT[family]["counts"]:
        if name in model.counts:
            _write_array(out, "counts", name, model.counts[name])
    out.append("end")


def dumps(model):
    """Serialize any model (including a pipeline) to a document string."""
    from .pipeline import PipelineModel

    out = []
    if isinstance(model, PipelineModel):
        out.append(f"{MAGIC}\t{FORMAT_VERSION}")
        out.append("family\tpipeline")
        for key, value in model.config.as_items():
            out.append(f"config\t{key}\t{value}")
        out.append("section\tlayer1")
        _dump_table_model(model.layer1, out)
        out.append("section\tlayer2")
        _dump_table_model(model.layer2, out)
        out.append("end")
    else:
        _dump_table_model(model, out)
    return "\n".join(out) + "\n"


save_model = dumps


class _Reader:
    def __init__(self, text):
        self.lines = text.split("\n")
        if self.lines and self.lines[-1] == "":
            self.lines.pop()
        self.pos = 0

    def next(self):
        if self.pos >= len(self.lines):
            raise TruncatedModelError(f"unexpected end of document after line {self.pos}")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def record(self, expected=None):
        fields = self.next().split("\t")
        if expected is not None and fields[0] != expected:
            raise ModelFormatError(
                f"line {self.pos}: expected {expected!r} record, got {fields[0]!r}")
        return fields


def _int(s, where):
    try:
        return int(s)
    except ValueError:
        raise ModelFormatError(f"{where}: expected an integer, got {s!r}") from None


def _read_header(r):
    fields = r.record()
    if fields[0] != MAGIC or len(fields) != 2:
        raise ModelFormatError(f"line {r.pos}: not a model document")
    if fields[1] != str(FORMAT_VERSION):
        raise ModelVersionError(
            f"unsupported model format version {fields[1]!r} (expected {FORMAT_VERSION})")
    family = r.record("family")
    if len(family) != 2:
        raise ModelFormatError(f"line {r.pos}: malformed family record")
    return family[1]


def _read_array(r, kind, name, shape, dtype):
    fields = r.record(kind)
    if len(fields) < 3 or fields[1] != name:
        raise ModelFormatError(f"line {r.pos}: expected {kind} {name!r}")
    declared = tuple(_int(d, f"line {r.pos}") for d in fields[2:])
    if declared != shape:
        raise DimensionMismatchError(
            f"{kind} {name!r} declares shape {declared}, header implies {shape}")
    n_rows = int(np.prod(shape[:-1])) if len(shape) > 1 else 1
    rows = []
    for _ in range(n_rows):
        line = r.next()
        vals = line.split("\t") if line else []
        if len(vals) != shape[-1]:
            raise DimensionMismatchError(
                f"line {r.pos}: {kind} {name!r} row has {len(vals)} values, expected {shape[-1]}")
        rows.append(vals)
    try:
        arr = np.array(rows, dtype=dtype)
    except ValueError as exc:
        raise ModelFormatError(f"{kind} {name!r}: {exc}") from None
    return arr.reshape(shape)


def _load_table_model(r, family):
    meta = {}
    fields = r.record()
    while fields[0] == "meta":
        if len(fields) != 3:
            raise ModelFormatError(f"line {r.pos}: malformed meta record")
        meta[fields[1]] = fields[2]
        fields = r.record()
    if fields[0] != "dims" or len(fields) != 9 or fields[1::2] != ["N", "K", "M", "P"]:
        raise ModelFormatError(f"line {r.pos}: malformed dims record")
    n, k, m, p = (_int(v, f"line {r.pos}") for v in fields[2::2])
    sizes = {"states": n, "tags": k, "words": m, "prefixes": p}
    names = ["states"] + (["tags"] if family == "feature" else []) + ["words", "prefixes"]
    inv = {}
    for name in names:
        rec = r.record("inventory")
        if len(rec) != 3 or rec[1] != name:
            raise ModelFormatError(f"line {r.pos}: expected inventory {name!r}")
        count = _int(rec[2], f"line {r.pos}")
        if count != sizes[name]:
            raise DimensionMismatchError(
                f"inventory {name!r} lists {count} entries, dims header says {sizes[name]}")
        inv[name] = tuple(r.next() for _ in range(count))
    lexicon = Lexicon(inv["words"])
    if lexicon.prefixes != inv["prefixes"]:
        raise ModelFormatError("prefix inventory does not match the word inventory")

    arrays = {}
    for name in _LAYOUT[family]["tables"]:
        arrays[name] = _read_array(r, "table", name, _expected_shape(name, n, k, m, p), float)
    counts = {}
    while True:
        line = r.next()
        if line == "end":
            break
        r.pos -= 1
        name = line.split("\t")[1] if "\t" in line else ""
        if name not in _LAYOUT[family]["counts"]:
            raise ModelFormatError(f"line {r.pos + 1}: unexpected record {line[:40]!r}")
        counts[name] = _read_array(r, "counts", name, _expected_shape(name, n, k, m, p), np.int64)

    prefixes = inv["prefixes"]
    smoothing = float(meta.get("smoothing", 0.0))
    if family == "first":
        return FirstOrderModel(
            states=inv["states"], lexicon=lexicon, pi=arrays["pi"], trans=arrays["trans"],
            emit=arrays["emit"], prefix_emit=PrefixTable(prefixes, arrays["prefix_emit"]),
            counts=counts, obs_field=meta.get("obs_field", "token"),
            state_field=meta.get("state_field", "pos_label"), smoothing=smoothing)
    if family == "second":
        return SecondOrderModel(
            states=inv["states"], lexicon=lexicon, pi=arrays["pi"], trans=arrays["trans"],
            trans3=arrays["trans3"], emit=arrays["emit"], emit2=arrays["emit2"],
            prefix_emit=PrefixTable(prefixes, arrays["prefix_emit"]),
            prefix_emit2=PrefixTable(prefixes, arrays["prefix_emit2"]),
            counts=counts, obs_field=meta.get("obs_field", "token"),
            state_field=meta.get("state_field", "ing_state"), smoothing=smoothing)
    return FeatureConditionedModel(
        states=inv["states"], tags=inv["tags"], lexicon=lexicon, pi=arrays["pi"],
        trans_f=arrays["trans_f"], emit_f=arrays["emit_f"],
        prefix_emit_f=PrefixTable(prefixes, arrays["prefix_emit_f"]),
        counts=counts, smoothing=smoothing)


def loads(text):
    """Parse a document produced by :func:`dumps`."""
    from .pipeline import PipelineConfig, PipelineModel

    r = _Reader(text)
    family = _read_header(r)
    if family in _LAYOUT:
        return _load_table_model(r, family)
    if family != "pipeline":
        raise ModelFormatError(f"unknown model family {family!r}")
    items = []
    fields = r.record()
    while fields[0] == "config":
        if len(fields) != 3:
            raise ModelFormatError(f"line {r.pos}: malformed config record")
        items.append((fields[1], fields[2]))
        fields = r.record()
    layers = {}
    for name in ("layer1", "layer2"):
        if fields != ["section", name]:
            raise ModelFormatError(f"line {r.pos}: expected section {name!r}")
        sub_family = _read_header(r)
        if sub_family not in _LAYOUT:
            raise ModelFormatError(f"section {name!r} has unsupported family {sub_family!r}")
        layers[name] = _load_table_model(r, sub_family)
        fields = r.record() if name == "layer1" else None
    r.record("end")
    return PipelineModel(layers["layer1"], layers["layer2"],
                         PipelineConfig.from_items(items))


load_model = loads


def write_model(model, path):
    Path(path).write_text(dumps(model), encoding="utf-8")


def read_model(path):
    return loads(Path(path).read_text(encoding="utf-8"))
