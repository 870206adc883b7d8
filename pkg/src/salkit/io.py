"""Text file formats: embedding tables, labeled datasets, word-pair scores,
and eraser serialization.

All files are UTF-8 with LF line endings and '.' decimal separators. Readers
reject malformed input with the offending line number instead of coercing.
Embedding vectors print with 9 significant digits (round trip within 1e-6);
datasets and erasers print with 17 significant digits, which round-trips
float64 exactly, so a saved eraser reproduces its projector bit for bit.

Eraser files are versioned: the first line is ``SALKIT v1 <kind>`` with kind
one of sal, inlp, ksal. Kernel erasers store the centered training inputs and
the orthonormalized eigenvector block; the Gram square root and null-space
basis are recomputed on load from exactly the same bits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import LabeledDataset, encode_guarded
from .errors import ContractError, DataError, LoadError, ParseError, UnknownTokenError
from .kernels import KernelSpec, KsalEraser, _nullspace, _sqrt_from_svd, gram_matrix
from .linear import SalEraser
from .probes import InlpEraser

_EMBED_FMT = "%.9g"
_EXACT_FMT = "%.17g"
_MAGIC = "SALKIT v1"


def _fmt_row(values, fmt: str) -> str:
    return " ".join(fmt % v for v in values)


def _parse_floats(parts: list[str], line_no: int, context: str) -> np.ndarray:
    try:
        return np.array([float(p) for p in parts])
    except ValueError as exc:
        raise ParseError(f"non-numeric value in {context}: {exc}", line_no) from None


def _read_text(path) -> list[str]:
    try:
        with open(path, encoding="utf-8") as handle:
            return handle.read().splitlines()
    except UnicodeDecodeError as exc:
        raise ParseError(f"file is not valid UTF-8: {exc}") from None


@dataclass(frozen=True)
class EmbeddingTable:
    """Ordered vocabulary with one vector per token."""

    vocabulary: list
    vectors: np.ndarray

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=float)
        vocab = list(self.vocabulary)
        if vectors.ndim != 2 or len(vocab) != vectors.shape[0]:
            raise DataError("vocabulary and vector rows disagree")
        if not np.isfinite(vectors).all():
            raise DataError("non-finite embedding values")
        seen = set()
        for tok in vocab:
            if not tok or any(ch.isspace() for ch in tok):
                raise DataError(f"token {tok!r} is empty or contains whitespace")
            if tok in seen:
                raise DataError(f"duplicate token {tok!r}")
            seen.add(tok)
        object.__setattr__(self, "vocabulary", vocab)
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(vocab)})

    def index(self, token: str) -> int:
        try:
            return self._index[token]
        except KeyError:
            raise UnknownTokenError(f"token {token!r} not in vocabulary") from None

    def vector(self, token: str) -> np.ndarray:
        return self.vectors[self.index(token)]


def read_embeddings(path) -> EmbeddingTable:
    """Read a ``n d`` header followed by n ``token v_1 ... v_d`` lines."""
    lines = _read_text(path)
    if not lines:
        raise ParseError("empty embedding file", 1)
    header = lines[0].split()
    if len(header) != 2:
        raise ParseError(f"header must be 'n d', got {lines[0]!r}", 1)
    try:
        n, d = int(header[0]), int(header[1])
    except ValueError:
        raise ParseError(f"header must be two integers, got {lines[0]!r}", 1) from None
    if n < 0 or d <= 0:
        raise ParseError(f"header declares impossible sizes n={n}, d={d}", 1)

    vocab: list[str] = []
    rows = np.empty((n, d))
    seen: set[str] = set()
    for i in range(n):
        line_no = i + 2
        if line_no - 1 >= len(lines):
            raise ParseError(f"expected {n} vector lines, file ends early", len(lines) + 1)
        parts = lines[line_no - 1].split()
        if len(parts) != d + 1:
            raise ParseError(
                f"expected a token and {d} values, got {len(parts)} fields", line_no
            )
        token = parts[0]
        if token in seen:
            raise ParseError(f"duplicate token {token!r}", line_no)
        seen.add(token)
        vocab.append(token)
        rows[i] = _parse_floats(parts[1:], line_no, "embedding vector")
    if len(lines) > n + 1:
        raise ParseError(f"header declares {n} vectors but more lines follow", n + 2)
    return EmbeddingTable(vocabulary=vocab, vectors=rows)


def write_embeddings(path, table: EmbeddingTable) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(f"{len(table.vocabulary)} {table.vectors.shape[1]}\n")
        for token, row in zip(table.vocabulary, table.vectors):
            handle.write(f"{token} {_fmt_row(row, _EMBED_FMT)}\n")


_DATASET_HEADER = ("id", "y", "z")


def read_dataset(path) -> LabeledDataset:
    """Read a TSV dataset with header ``id  y  z  x_0 ... x_{d-1}``.

    Task and guarded labels stay categorical strings; the guarded encoding
    (sign column or one-hot block) is attached uncentered.
    """
    lines = _read_text(path)
    if not lines:
        raise ParseError("empty dataset file", 1)
    header = lines[0].split("\t")
    if len(header) < 4 or tuple(header[:3]) != _DATASET_HEADER:
        raise ParseError(
            "header must be 'id\\ty\\tz\\tx_0...' with at least one feature column", 1
        )
    d = len(header) - 3

    ids: list[str] = []
    ys: list[str] = []
    zs: list[str] = []
    feats = []
    for i, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) != 3 + d:
            raise ParseError(f"expected {3 + d} columns, got {len(parts)}", i)
        ids.append(parts[0])
        ys.append(parts[1])
        zs.append(parts[2])
        feats.append(_parse_floats(parts[3:], i, "feature columns"))
    if not feats:
        raise ParseError("dataset has no rows", 2)

    guarded_labels = np.array(zs)
    return LabeledDataset(
        inputs=np.array(feats),
        task_labels=np.array(ys),
        guarded=encode_guarded(guarded_labels),
        guarded_labels=guarded_labels,
        ids=np.array(ids),
    )


def write_dataset(path, dataset: LabeledDataset) -> None:
    """Write a dataset in the TSV format ``read_dataset`` accepts.

    Feature values print with 17 significant digits, so read-after-write is
    exact. Inputs are written as stored (no mean is re-added).
    """
    d = dataset.n_features
    header = "\t".join(list(_DATASET_HEADER) + [f"x_{j}" for j in range(d)])
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(header + "\n")
        for i in range(dataset.n_samples):
            row = _fmt_row(dataset.inputs[i], _EXACT_FMT).replace(" ", "\t")
            handle.write(
                f"{dataset.ids[i]}\t{dataset.task_labels[i]}\t"
                f"{dataset.guarded_labels[i]}\t{row}\n"
            )


def read_word_pairs(path) -> list:
    """Read ``word1<TAB>word2<TAB>score`` lines into (w1, w2, float) tuples."""
    lines = _read_text(path)
    pairs = []
    for i, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ParseError(f"expected 'word1\\tword2\\tscore', got {len(parts)} fields", i)
        try:
            score = float(parts[2])
        except ValueError:
            raise ParseError(f"non-numeric score {parts[2]!r}", i) from None
        pairs.append((parts[0], parts[1], score))
    return pairs


def save_eraser(path, eraser) -> None:
    """Serialize a fitted eraser to the versioned text format."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        if isinstance(eraser, SalEraser):
            d = eraser.dim
            dprime = eraser.v.shape[0]
            handle.write(f"{_MAGIC} sal\n")
            handle.write(f"{d} {dprime} {eraser.k} {_EXACT_FMT % eraser.alpha}\n")
            handle.write(_fmt_row(eraser.input_mean, _EXACT_FMT) + "\n")
            for row in eraser.u:
                handle.write(_fmt_row(row, _EXACT_FMT) + "\n")
            handle.write(_fmt_row(eraser.sigma, _EXACT_FMT) + "\n")
            for row in eraser.v:
                handle.write(_fmt_row(row, _EXACT_FMT) + "\n")
        elif isinstance(eraser, InlpEraser):
            d = eraser.dim
            m = eraser.directions.shape[0]
            handle.write(f"{_MAGIC} inlp\n")
            handle.write(f"{d} 0 {m} 0\n")
            handle.write(_fmt_row(eraser.input_mean, _EXACT_FMT) + "\n")
            for row in eraser.directions:
                handle.write(_fmt_row(row, _EXACT_FMT) + "\n")
        elif isinstance(eraser, KsalEraser):
            n, d = eraser.train_inputs.shape
            handle.write(f"{_MAGIC} ksal\n")
            handle.write(
                f"{n} {d} {eraser.k} {eraser.requested_k} "
                f"{eraser.spec.family} {_EXACT_FMT % eraser.spec.gamma}\n"
            )
            handle.write(_fmt_row(eraser.input_mean, _EXACT_FMT) + "\n")
            handle.write(_fmt_row(eraser.eigenvalues, _EXACT_FMT) + "\n")
            for row in eraser.train_inputs:
                handle.write(_fmt_row(row, _EXACT_FMT) + "\n")
            if eraser.k:
                for row in eraser.w_block:
                    handle.write(_fmt_row(row, _EXACT_FMT) + "\n")
        else:
            raise ContractError(f"cannot serialize {type(eraser).__name__}")


def _expect_line(lines: list[str], idx: int) -> str:
    if idx >= len(lines):
        raise LoadError(f"file truncated at line {idx + 1}")
    return lines[idx]


def _load_floats(lines: list[str], idx: int, count: int, context: str) -> np.ndarray:
    parts = _expect_line(lines, idx).split()
    if len(parts) != count:
        raise LoadError(
            f"line {idx + 1}: expected {count} values for {context}, got {len(parts)}"
        )
    try:
        return np.array([float(p) for p in parts])
    except ValueError as exc:
        raise LoadError(f"line {idx + 1}: non-numeric value in {context}: {exc}") from None


def _load_block(lines: list[str], idx: int, rows: int, cols: int, context: str) -> np.ndarray:
    block = np.empty((rows, cols))
    for r in range(rows):
        block[r] = _load_floats(lines, idx + r, cols, context)
    return block


def load_eraser(path):
    """Load an eraser saved by ``save_eraser``. Returns the matching type."""
    lines = _read_text(path)
    if not lines:
        raise LoadError("empty eraser file")
    head = lines[0].split()
    if len(head) != 3 or " ".join(head[:2]) != _MAGIC:
        raise LoadError(f"bad magic line {lines[0]!r}; expected '{_MAGIC} <kind>'")
    kind = head[2]

    if kind == "sal":
        parts = _expect_line(lines, 1).split()
        if len(parts) != 4:
            raise LoadError("line 2: expected 'd dprime k alpha'")
        try:
            d, dprime, k = int(parts[0]), int(parts[1]), int(parts[2])
            alpha = float(parts[3])
        except ValueError as exc:
            raise LoadError(f"line 2: {exc}") from None
        if k > d or k < 0:
            raise LoadError(f"stored k={k} is outside [0, d={d}]")
        if dprime > d or dprime <= 0 or d <= 0:
            raise LoadError(f"inconsistent dimensions d={d}, d'={dprime}")
        m = min(d, dprime)
        if k > m:
            raise LoadError(f"stored k={k} exceeds the number of singular values {m}")
        mean = _load_floats(lines, 2, d, "input mean")
        u = _load_block(lines, 3, d, d, "left singular vectors")
        sigma = _load_floats(lines, 3 + d, m, "singular values")
        v = _load_block(lines, 4 + d, dprime, dprime, "right singular vectors")
        if np.any(np.diff(sigma) > 0) or np.any(sigma < 0):
            raise LoadError("singular values must be non-negative and non-increasing")
        return SalEraser(u=u, sigma=sigma, v=v, k=k, alpha=alpha, input_mean=mean)

    if kind == "inlp":
        parts = _expect_line(lines, 1).split()
        if len(parts) != 4:
            raise LoadError("line 2: expected 'd 0 m 0'")
        try:
            d, m = int(parts[0]), int(parts[2])
        except ValueError as exc:
            raise LoadError(f"line 2: {exc}") from None
        if m > d or m < 0:
            raise LoadError(f"stored direction count {m} is outside [0, d={d}]")
        mean = _load_floats(lines, 2, d, "input mean")
        dirs = _load_block(lines, 3, m, d, "projection directions") if m else np.zeros((0, d))
        return InlpEraser(directions=dirs, iterations=m, input_mean=mean)

    if kind == "ksal":
        parts = _expect_line(lines, 1).split()
        if len(parts) != 6:
            raise LoadError("line 2: expected 'n d k requested_k family gamma'")
        try:
            n, d, k, requested_k = (int(p) for p in parts[:4])
            family = parts[4]
            gamma = float(parts[5])
        except ValueError as exc:
            raise LoadError(f"line 2: {exc}") from None
        if k > n or k < 0:
            raise LoadError(f"stored k={k} is outside [0, n={n}]")
        spec = KernelSpec(family=family, gamma=gamma)
        mean = _load_floats(lines, 2, d, "input mean")
        eigenvalues = _load_floats(lines, 3, k, "eigenvalues")
        train = _load_block(lines, 4, n, d, "training inputs")
        w = _load_block(lines, 4 + n, n, k, "eigenvector block") if k else np.zeros((n, 0))
        k_phi = gram_matrix(spec, train)
        k_sqrt = _sqrt_from_svd(k_phi)
        l_basis = _nullspace((k_sqrt @ w).T, n)
        return KsalEraser(
            train_inputs=train,
            spec=spec,
            w_block=w,
            k_sqrt=k_sqrt,
            l_basis=l_basis,
            k=k,
            input_mean=mean,
            requested_k=requested_k,
            k_phi_w=k_phi @ w,
            eigenvalues=eigenvalues,
        )

    raise LoadError(f"unknown eraser kind {kind!r}")
