"""Corpus ingestion and on-disk formats.

Three layers live here:

* tagged token streams: ``surface<TAB>pos`` lines, one token per line, with
  blank lines and literal ``<NL>`` lines acting as hard sentence breaks;
* sentence segmentation over those streams;
* the JSONL corpus format: one verification problem per line, each holding
  unknown/known document lists, plus an optional sidecar JSONL of reference
  documents drawn from other authors.

Documents come in two flavours. A *tagged* document still carries
(surface, pos) pairs and must be masked before modelling; a *masked*
document holds plain token strings and is ready for counting.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional, Union

from .errors import CorpusError, ParseError

# Closed part-of-speech label set for the tagged format. Anything outside
# this set is a parse error, not a soft warning.
POS_LABELS = frozenset(
    {
        "NOUN",
        "PROPN",
        "VERB",
        "ADJ",
        "ADV",
        "PRON",
        "DET",
        "ADP",
        "CONJ",
        "PART",
        "NUM",
        "PUNCT",
        "SYM",
        "OTHER",
    }
)

# Labels whose surfaces are kept verbatim by masking regardless of lexicon
# membership: the grammatical glue of a sentence.
FUNCTION_POS = frozenset({"PRON", "DET", "ADP", "CONJ", "PART", "PUNCT", "OTHER"})

# Content labels: surfaces are replaced by placeholders unless the lexicon
# retains them explicitly.
CONTENT_POS = POS_LABELS - FUNCTION_POS

# Sentence-terminal surfaces. A boundary falls after each of these.
TERMINAL_SURFACES = frozenset({".", "!", "?", "…"})

# Line marker for a hard break in the tagged format (consumed, never a token).
NEWLINE_MARKER = "<NL>"

# Surfaces that collide with model pseudo-tokens; masked documents must not
# contain them.
RESERVED_SURFACES = frozenset({"<BOS>", "<EOS>", "<UNK>"})

Sentence = tuple[str, ...]


@dataclass(frozen=True)
class TaggedToken:
    """One token of a tagged stream: the surface form and its POS label."""

    surface: str
    pos: str

    def __post_init__(self) -> None:
        if not self.surface:
            raise ParseError("token surface must be non-empty")
        if "\t" in self.surface or "\n" in self.surface:
            raise ParseError(f"token surface contains format characters: {self.surface!r}")
        if self.pos not in POS_LABELS:
            raise ParseError(f"unknown POS label {self.pos!r}")


@dataclass(frozen=True)
class Document:
    """A sequence of sentences, either tagged or already masked.

    ``sentences`` is a tuple of non-empty tuples; items are TaggedToken for
    tagged documents and plain strings for masked ones. Mixing is rejected.
    """

    id: str
    sentences: tuple[tuple, ...]

    def __post_init__(self) -> None:
        if not self.id or not isinstance(self.id, str):
            raise CorpusError("document id must be a non-empty string")
        if not self.sentences:
            raise CorpusError(f"document {self.id!r} has no sentences")
        kinds = set()
        for sent in self.sentences:
            if not sent:
                raise CorpusError(f"document {self.id!r} contains an empty sentence")
            for tok in sent:
                if isinstance(tok, TaggedToken):
                    kinds.add("tagged")
                elif isinstance(tok, str):
                    kinds.add("masked")
                    if not tok:
                        raise CorpusError(f"document {self.id!r} contains an empty token")
                    if tok in RESERVED_SURFACES:
                        raise CorpusError(
                            f"document {self.id!r} contains reserved token {tok!r}"
                        )
                else:
                    raise CorpusError(
                        f"document {self.id!r} contains a non-token item: {tok!r}"
                    )
        if len(kinds) > 1:
            raise CorpusError(f"document {self.id!r} mixes tagged and masked sentences")

    @property
    def is_tagged(self) -> bool:
        return isinstance(self.sentences[0][0], TaggedToken)

    @property
    def token_count(self) -> int:
        return sum(len(s) for s in self.sentences)


@dataclass(frozen=True)
class VerificationProblem:
    """One same-author-or-not question: unknown documents vs known documents.

    ``label`` is "Y" (same author), "N" (different author) or None when the
    ground truth is withheld. ``author`` optionally names the known-side
    author so evaluation can enforce author-disjoint splits.
    """

    id: str
    unknown_docs: tuple[Document, ...]
    known_docs: tuple[Document, ...]
    label: Optional[str] = None
    author: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.id or not isinstance(self.id, str):
            raise CorpusError("problem id must be a non-empty string")
        if not self.unknown_docs:
            raise CorpusError(f"problem {self.id!r} has no unknown documents")
        if not self.known_docs:
            raise CorpusError(f"problem {self.id!r} has no known documents")
        if self.label not in (None, "Y", "N"):
            raise CorpusError(
                f"problem {self.id!r} has invalid label {self.label!r}; expected Y, N or null"
            )


@dataclass(frozen=True)
class Corpus:
    """A partition's worth of problems plus shared reference documents."""

    problems: tuple[VerificationProblem, ...]
    reference_docs: tuple[Document, ...] = ()
    partition: str = "test"

    def __post_init__(self) -> None:
        if self.partition not in ("train", "test"):
            raise CorpusError(f"invalid partition {self.partition!r}")
        seen = set()
        for prob in self.problems:
            if prob.id in seen:
                raise CorpusError(f"duplicate problem id {prob.id!r}")
            seen.add(prob.id)
        problem_doc_ids = {
            doc.id
            for prob in self.problems
            for doc in (*prob.unknown_docs, *prob.known_docs)
        }
        ref_ids = set()
        for doc in self.reference_docs:
            if doc.id in ref_ids:
                raise CorpusError(f"duplicate reference document id {doc.id!r}")
            ref_ids.add(doc.id)
        overlap = ref_ids & problem_doc_ids
        if overlap:
            raise CorpusError(
                f"reference documents overlap problem documents: {sorted(overlap)[:5]}"
            )

    @property
    def labels(self) -> tuple[Optional[str], ...]:
        return tuple(p.label for p in self.problems)


def segment_sentences(
    items: Iterable[Optional[TaggedToken]],
) -> list[tuple[TaggedToken, ...]]:
    """Split a token stream into sentences.

    ``items`` yields TaggedToken objects with None acting as a hard break
    (blank line or newline marker in the file format). A boundary also falls
    immediately after every terminal surface (. ! ? …). Empty segments are
    dropped, so consecutive breaks never produce empty sentences and the
    concatenation of the output equals the input token sequence.
    """
    sentences: list[tuple[TaggedToken, ...]] = []
    current: list[TaggedToken] = []

    def flush() -> None:
        if current:
            sentences.append(tuple(current))
            current.clear()

    for item in items:
        if item is None:
            flush()
            continue
        current.append(item)
        if item.surface in TERMINAL_SURFACES:
            flush()
    flush()
    return sentences


def parse_tagged_document(text: Union[str, Iterable[str]], doc_id: str) -> Document:
    """Parse ``surface<TAB>pos`` lines into a tagged Document.

    Raises ParseError with a 1-based line number for malformed lines, unknown
    POS labels, or an input with no tokens at all. ASCII "..." surfaces are
    normalized to the single ellipsis character.
    """
    lines = text.splitlines() if isinstance(text, str) else text
    stream: list[Optional[TaggedToken]] = []
    saw_token = False
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        stripped = line.strip()
        if not stripped or stripped == NEWLINE_MARKER:
            stream.append(None)
            continue
        fields = line.split("\t")
        if len(fields) != 2:
            raise ParseError(
                f"{doc_id}: line {lineno}: expected 'surface<TAB>pos', got {len(fields)} field(s)"
            )
        surface, pos = fields
        if not surface:
            raise ParseError(f"{doc_id}: line {lineno}: empty surface")
        if pos not in POS_LABELS:
            raise ParseError(f"{doc_id}: line {lineno}: unknown POS label {pos!r}")
        if surface == "...":
            surface = "…"
        stream.append(TaggedToken(surface, pos))
        saw_token = True
    if not saw_token:
        raise ParseError(f"{doc_id}: empty document")
    sentences = segment_sentences(stream)
    return Document(id=doc_id, sentences=tuple(sentences))


def _doc_from_json(obj: dict, base_dir: Path, where: str) -> Document:
    if not isinstance(obj, dict):
        raise CorpusError(f"{where}: document entry is not an object")
    doc_id = obj.get("id")
    if not isinstance(doc_id, str) or not doc_id:
        raise CorpusError(f"{where}: document missing string id")
    if "sentences" in obj:
        sents = obj["sentences"]
        if not isinstance(sents, list):
            raise CorpusError(f"{where}: document {doc_id!r} sentences must be a list")
        try:
            return Document(
                id=doc_id,
                sentences=tuple(tuple(str(t) for t in sent) for sent in sents),
            )
        except CorpusError as exc:
            raise CorpusError(f"{where}: {exc}") from exc
    if "tagged" in obj:
        rel = obj["tagged"]
        if not isinstance(rel, str) or not rel:
            raise CorpusError(f"{where}: document {doc_id!r} has invalid tagged path")
        path = base_dir / rel
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise CorpusError(
                f"{where}: cannot read tagged file {str(path)!r}: {exc}"
            ) from exc
        return parse_tagged_document(text, doc_id)
    raise CorpusError(f"{where}: document {doc_id!r} has neither 'sentences' nor 'tagged'")


def _doc_to_json(doc: Document) -> dict:
    if doc.is_tagged:
        raise CorpusError(
            f"document {doc.id!r} is tagged; mask it before serialization"
        )
    return {"id": doc.id, "sentences": [list(s) for s in doc.sentences]}


def _iter_jsonl(path: Path) -> Iterator[tuple[int, dict]]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read {str(path)!r}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{path.name}: line {lineno}: invalid JSON: {exc}") from exc
        yield lineno, obj


def _resolve_refs_path(problems_path: Path) -> Optional[Path]:
    # Prefer a per-file sidecar, fall back to a directory-wide refs.jsonl.
    stem_sidecar = problems_path.with_name(problems_path.stem + ".refs.jsonl")
    if stem_sidecar.exists():
        return stem_sidecar
    shared = problems_path.with_name("refs.jsonl")
    if shared.exists() and shared != problems_path:
        return shared
    return None


def load_reference_docs(path: Union[str, Path]) -> tuple[Document, ...]:
    """Load a sidecar JSONL of reference documents."""
    path = Path(path)
    docs = []
    for lineno, obj in _iter_jsonl(path):
        docs.append(_doc_from_json(obj, path.parent, f"{path.name}: line {lineno}"))
    return tuple(docs)


def load_corpus(
    problems_path: Union[str, Path],
    refs_path: Union[str, Path, None] = None,
    partition: Optional[str] = None,
) -> Corpus:
    """Load a problems JSONL file plus its reference sidecar.

    When ``refs_path`` is omitted the loader looks for ``<stem>.refs.jsonl``
    next to the problems file, then for a shared ``refs.jsonl`` in the same
    directory. ``partition`` overrides (and must agree with) any per-problem
    "partition" fields; with neither present the corpus defaults to "test".
    """
    problems_path = Path(problems_path)
    problems = []
    field_partitions = set()
    for lineno, obj in _iter_jsonl(problems_path):
        where = f"{problems_path.name}: line {lineno}"
        if not isinstance(obj, dict):
            raise CorpusError(f"{where}: problem entry is not an object")
        prob_id = obj.get("id")
        if not isinstance(prob_id, str) or not prob_id:
            raise CorpusError(f"{where}: problem missing string id")
        label = obj.get("label")
        if label not in (None, "Y", "N"):
            raise CorpusError(f"{where}: invalid label {label!r}; expected Y, N or null")
        author = obj.get("author")
        if author is not None and not isinstance(author, str):
            raise CorpusError(f"{where}: author must be a string when present")
        part = obj.get("partition")
        if part is not None:
            if part not in ("train", "test"):
                raise CorpusError(f"{where}: invalid partition {part!r}")
            field_partitions.add(part)
        for key in ("unknown", "known"):
            if not isinstance(obj.get(key), list) or not obj[key]:
                raise CorpusError(f"{where}: {key!r} must be a non-empty list")
        unknown = tuple(
            _doc_from_json(d, problems_path.parent, where) for d in obj["unknown"]
        )
        known = tuple(
            _doc_from_json(d, problems_path.parent, where) for d in obj["known"]
        )
        problems.append(
            VerificationProblem(
                id=prob_id, unknown_docs=unknown, known_docs=known, label=label, author=author
            )
        )
    if len(field_partitions) > 1:
        raise CorpusError(
            f"{problems_path.name}: mixed partition fields {sorted(field_partitions)}"
        )
    field_part = field_partitions.pop() if field_partitions else None
    if partition is not None and partition not in ("train", "test"):
        raise CorpusError(f"invalid partition {partition!r}")
    if partition is not None and field_part is not None and partition != field_part:
        raise CorpusError(
            f"partition argument {partition!r} conflicts with per-problem fields {field_part!r}"
        )
    effective = partition or field_part or "test"

    if refs_path is None:
        resolved = _resolve_refs_path(problems_path)
    else:
        resolved = Path(refs_path)
    refs = load_reference_docs(resolved) if resolved is not None else ()
    return Corpus(problems=tuple(problems), reference_docs=refs, partition=effective)


def serialize_corpus(
    corpus: Corpus,
    problems_path: Union[str, Path],
    refs_path: Union[str, Path, None] = None,
) -> None:
    """Write a corpus back to JSONL (problems file plus reference sidecar).

    Only masked corpora serialize; tagged documents must be masked first.
    Output is deterministic: sorted keys, compact separators, one problem
    per line.
    """
    problems_path = Path(problems_path)
    lines = []
    for prob in corpus.problems:
        obj = {
            "id": prob.id,
            "label": prob.label,
            "partition": corpus.partition,
            "unknown": [_doc_to_json(d) for d in prob.unknown_docs],
            "known": [_doc_to_json(d) for d in prob.known_docs],
        }
        if prob.author is not None:
            obj["author"] = prob.author
        lines.append(json.dumps(obj, sort_keys=True, separators=(",", ":")))
    problems_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    if corpus.reference_docs or refs_path is not None:
        if refs_path is None:
            refs_path = problems_path.with_name(problems_path.stem + ".refs.jsonl")
        ref_lines = [
            json.dumps(_doc_to_json(d), sort_keys=True, separators=(",", ":"))
            for d in corpus.reference_docs
        ]
        Path(refs_path).write_text("\n".join(ref_lines) + "\n", encoding="utf-8")
