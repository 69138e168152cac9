"""Method extraction and token preprocessing for Java repositories.

A :class:`Corpus` is the immutable list of production methods found in one
repository snapshot, plus the per-file facts (package, imports, class
declarations) that call resolution needs later.
"""

from __future__ import annotations

import fnmatch
import logging
import os
import re
from collections import defaultdict
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path, PurePosixPath
from typing import Any

from . import _java

logger = logging.getLogger(__name__)

__all__ = [
    "ClassDecl",
    "Corpus",
    "EmptyCorpusError",
    "ExclusionRules",
    "MethodRecord",
    "SourceFile",
    "extract_corpus",
    "preprocess_method",
    "scan_tokens",
    "split_identifier",
]


class EmptyCorpusError(ValueError):
    """Raised when a repository yields no production methods."""

    def __init__(self, message: str, excluded_test_files: Sequence[str] = ()):
        super().__init__(message)
        self.excluded_test_files = list(excluded_test_files)


# ---------------------------------------------------------------------------
# Tokenization
# ---------------------------------------------------------------------------

_WORD = re.compile(r"\w+")
_LEXICAL = re.compile(
    r'(?P<comment>/\*.*?\*/|//[^\r\n]*)'
    r'|(?P<text>"""(?:\\.|[^\\])*?"""|"(?:\\.|[^"\\\r\n])*"|\'(?:\\.|[^\'\\\r\n])*\')'
    r"|(?P<word>\w+)",
    re.DOTALL,
)


def split_identifier(word: str) -> list[str]:
    """Split one identifier into lowercase subtokens.

    Boundaries: ``_``, lower->upper, upper->upper when the second upper
    starts a lowercase run, and any letter<->digit change.

    >>> split_identifier("HTTPServer2")
    ['http', 'server', '2']
    >>> split_identifier("get_itemCount")
    ['get', 'item', 'count']
    """
    out: list[str] = []
    for chunk in _WORD.findall(word):
        for piece in chunk.split("_"):
            if not piece:
                continue
            start = 0
            for i in range(1, len(piece)):
                prev, cur = piece[i - 1], piece[i]
                nxt = piece[i + 1] if i + 1 < len(piece) else ""
                if (
                    prev.isdigit() != cur.isdigit()
                    or (not prev.isupper() and cur.isupper())
                    or (prev.isupper() and cur.isupper() and nxt.isalpha() and not nxt.isupper())
                ):
                    out.append(piece[start:i].lower())
                    start = i
            out.append(piece[start:].lower())
    return out


def _words(fragment: str) -> list[str]:
    tokens: list[str] = []
    for word in _WORD.findall(fragment):
        tokens.extend(split_identifier(word))
    return tokens


def _literal_body(literal: str) -> str:
    if literal.startswith('"""'):
        return literal[3:-3]
    return literal[1:-1]


def _lexical_tokens(source: str) -> list[str]:
    tokens: list[str] = []
    for m in _LEXICAL.finditer(source):
        if m.lastgroup == "comment":
            continue
        if m.lastgroup == "text":
            tokens.extend(_words(_literal_body(m.group())))
        else:
            tokens.extend(split_identifier(m.group()))
    return tokens


def scan_tokens(raw_source: str) -> tuple[list[str], bool]:
    """Tokenize a method and report whether the syntax tree was clean.

    Returns ``(tokens, degraded)``; ``degraded`` is True when the source did
    not parse and a lexical scan was used instead.
    """
    member = _java.parse_member(raw_source)
    if member is None:
        return _lexical_tokens(raw_source), True
    tokens: list[str] = []
    stack = [member]
    while stack:
        node = stack.pop()
        if node.type in _java.COMMENT_NODES:
            continue
        if node.type in _java.LITERAL_TEXT_NODES:
            tokens.extend(_words(_literal_body(_java.text(node))))
            continue
        if node.child_count == 0:
            tokens.extend(_words(_java.text(node)))
            continue
        stack.extend(reversed(node.children))
    return tokens, False


def preprocess_method(raw_source: str) -> list[str]:
    """Comment-free, identifier-split, lowercased token stream of a method.

    String and character literal contents are kept as words; punctuation,
    operators and the ``@`` of annotations are dropped.

    >>> preprocess_method("int getItemCount(){/*c*/ return n;}")
    ['int', 'get', 'item', 'count', 'return', 'n']
    """
    tokens, degraded = scan_tokens(raw_source)
    if degraded:
        logger.warning("method source did not parse; used lexical token scan")
    return tokens


# ---------------------------------------------------------------------------
# Records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MethodRecord:
    method_id: int
    file_path: str
    class_name: str
    enclosing_class_chain: tuple[str, ...]
    method_name: str
    n_args: int
    start_line: int
    end_line: int
    raw_source: str
    tokens: tuple[str, ...]

    @property
    def is_constructor(self) -> bool:
        return self.method_name == self.class_name

    def to_json(self) -> dict[str, Any]:
        return {
            "method_id": self.method_id,
            "file_path": self.file_path,
            "class_name": self.class_name,
            "enclosing_class_chain": list(self.enclosing_class_chain),
            "method_name": self.method_name,
            "n_args": self.n_args,
            "start_line": self.start_line,
            "end_line": self.end_line,
            "raw_source": self.raw_source,
            "tokens": list(self.tokens),
        }

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> MethodRecord:
        return cls(
            method_id=int(obj["method_id"]),
            file_path=str(obj["file_path"]),
            class_name=str(obj["class_name"]),
            enclosing_class_chain=tuple(obj["enclosing_class_chain"]),
            method_name=str(obj["method_name"]),
            n_args=int(obj["n_args"]),
            start_line=int(obj["start_line"]),
            end_line=int(obj["end_line"]),
            raw_source=str(obj["raw_source"]),
            tokens=tuple(obj["tokens"]),
        )


@dataclass(frozen=True)
class ClassDecl:
    """A class-like declaration: chain of names, ``extends`` target and fields."""

    chain: tuple[str, ...]
    superclass: str | None = None
    fields: tuple[tuple[str, str], ...] = ()

    def to_json(self) -> dict[str, Any]:
        return {
            "chain": list(self.chain),
            "superclass": self.superclass,
            "fields": [list(f) for f in self.fields],
        }

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> ClassDecl:
        return cls(
            chain=tuple(obj["chain"]),
            superclass=obj.get("superclass"),
            fields=tuple((str(n), str(t)) for n, t in obj.get("fields", ())),
        )


@dataclass(frozen=True)
class SourceFile:
    """File-level facts needed to resolve names used inside the file."""

    file_path: str
    package: str = ""
    imports: tuple[str, ...] = ()
    static_imports: tuple[str, ...] = ()
    classes: tuple[ClassDecl, ...] = ()

    def to_json(self) -> dict[str, Any]:
        return {
            "file_path": self.file_path,
            "package": self.package,
            "imports": list(self.imports),
            "static_imports": list(self.static_imports),
            "classes": [c.to_json() for c in self.classes],
        }

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> SourceFile:
        return cls(
            file_path=str(obj["file_path"]),
            package=str(obj.get("package", "")),
            imports=tuple(obj.get("imports", ())),
            static_imports=tuple(obj.get("static_imports", ())),
            classes=tuple(ClassDecl.from_json(c) for c in obj.get("classes", ())),
        )


@dataclass(frozen=True)
class Corpus:
    repo_root: str
    methods: tuple[MethodRecord, ...]
    excluded_test_files: tuple[str, ...] = ()
    files: tuple[SourceFile, ...] = ()
    skipped: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        for i, m in enumerate(self.methods):
            if m.method_id != i:
                raise ValueError(f"method_id {m.method_id} at position {i}; ids must be 0..N-1")
        seen: set[tuple[str, int]] = set()
        for m in self.methods:
            key = (m.file_path, m.start_line)
            if key in seen:
                raise ValueError(f"two methods start at {m.file_path}:{m.start_line}")
            seen.add(key)

    def __len__(self) -> int:
        return len(self.methods)

    def __getitem__(self, method_id: int) -> MethodRecord:
        return self.methods[method_id]

    @cached_property
    def file_index(self) -> dict[str, tuple[int, ...]]:
        index: dict[str, list[int]] = defaultdict(list)
        for m in self.methods:
            index[m.file_path].append(m.method_id)
        return {path: tuple(ids) for path, ids in index.items()}

    @cached_property
    def source_files(self) -> dict[str, SourceFile]:
        return {f.file_path: f for f in self.files}

    def to_json(self) -> dict[str, Any]:
        return {
            "repo_root": self.repo_root,
            "methods": [m.to_json() for m in self.methods],
            "excluded_test_files": list(self.excluded_test_files),
            "files": [f.to_json() for f in self.files],
            "skipped": [list(s) for s in self.skipped],
        }

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> Corpus:
        return cls(
            repo_root=str(obj["repo_root"]),
            methods=tuple(MethodRecord.from_json(m) for m in obj["methods"]),
            excluded_test_files=tuple(obj.get("excluded_test_files", ())),
            files=tuple(SourceFile.from_json(f) for f in obj.get("files", ())),
            skipped=tuple((str(p), str(r)) for p, r in obj.get("skipped", ())),
        )


# ---------------------------------------------------------------------------
# Extraction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExclusionRules:
    """Predicate deciding which ``.java`` files count as test code.

    With ``use_defaults`` a path is a test file when one of its directory
    components is ``test`` or ``tests`` or it lies under ``src/test/``.
    ``globs`` are extra fnmatch patterns on the repository-relative path.
    """

    globs: tuple[str, ...] = ()
    use_defaults: bool = True

    def is_test(self, rel_path: str) -> bool:
        path = PurePosixPath(rel_path)
        if self.use_defaults:
            if any(part in ("test", "tests") for part in path.parts[:-1]):
                return True
            if "src/test/" in rel_path:
                return True
        return any(fnmatch.fnmatchcase(rel_path, g) for g in self.globs)


@dataclass
class _FileResult:
    rel_path: str
    methods: list[dict[str, Any]] = field(default_factory=list)
    source_file: SourceFile | None = None
    error: str | None = None


def _import_target(node) -> tuple[str, bool, bool]:
    is_static = any(c.type == "static" for c in node.children)
    wildcard = any(c.type == "asterisk" for c in node.children)
    name = next(
        (_java.text(c) for c in node.named_children if c.type in ("scoped_identifier", "identifier")),
        "",
    )
    return (name + ".*" if wildcard else name), is_static, wildcard


def _class_fields(body) -> list[tuple[str, str]]:
    fields: list[tuple[str, str]] = []
    if body is None:
        return fields
    for member in body.named_children:
        if member.type == "enum_body_declarations":
            fields.extend(_class_fields(member))
            continue
        if member.type not in ("field_declaration", "constant_declaration"):
            continue
        declared = _java.type_name(member.child_by_field_name("type"))
        for decl in member.children_by_field_name("declarator"):
            name = _java.text(decl.child_by_field_name("name"))
            ftype = declared
            if ftype and decl.child_by_field_name("dimensions") is not None:
                ftype += "[]"
            if ftype and name:
                fields.append((name, ftype))
    return fields


def _extract_file(repo_root: Path, rel_path: str) -> _FileResult:
    result = _FileResult(rel_path)
    try:
        source = (repo_root / rel_path).read_bytes()
    except OSError as exc:
        result.error = f"{type(exc).__name__}: {exc.strerror or exc}"
        return result

    tree = _java.parse(source)
    if tree.root_node.has_error:
        logger.warning("%s: syntax errors; extracting best-effort", rel_path)

    package = ""
    imports: list[str] = []
    static_imports: list[str] = []
    classes: list[ClassDecl] = []

    def visit(container, chain: tuple[str, ...]) -> None:
        for node in container.named_children:
            kind = node.type
            if kind in _java.CLASS_NODES:
                name = _java.text(node.child_by_field_name("name"))
                inner_chain = chain + (name,)
                superclass = None
                sup = node.child_by_field_name("superclass")
                if sup is not None and sup.named_children:
                    superclass = _java.type_name(sup.named_children[0])
                body = node.child_by_field_name("body")
                fields = _class_fields(body)
                if kind == "record_declaration":
                    params = node.child_by_field_name("parameters")
                    for p in params.named_children if params is not None else ():
                        ptype = _java.type_name(p.child_by_field_name("type"))
                        pname = _java.text(p.child_by_field_name("name"))
                        if ptype and pname:
                            fields.append((pname, ptype))
                    _record_components[inner_chain] = params
                classes.append(ClassDecl(inner_chain, superclass, tuple(fields)))
                if body is not None:
                    visit(body, inner_chain)
            elif kind in _java.METHOD_NODES and chain:
                if kind == "compact_constructor_declaration":
                    n_args = _java.count_parameters(_record_components.get(chain))
                else:
                    n_args = _java.count_parameters(node.child_by_field_name("parameters"))
                if kind == "method_declaration":
                    method_name = _java.text(node.child_by_field_name("name"))
                else:
                    method_name = chain[-1]
                raw = _java.text(node)
                result.methods.append(
                    {
                        "file_path": rel_path,
                        "class_name": chain[-1],
                        "enclosing_class_chain": chain,
                        "method_name": method_name,
                        "n_args": n_args,
                        "start_line": node.start_point[0] + 1,
                        "end_line": node.end_point[0] + 1,
                        "raw_source": raw,
                        "tokens": tuple(preprocess_method(raw)),
                    }
                )
            elif kind == "enum_body_declarations":
                visit(node, chain)

    _record_components: dict[tuple[str, ...], Any] = {}
    for node in tree.root_node.named_children:
        if node.type == "package_declaration":
            package = next(
                (_java.text(c) for c in node.named_children if c.type in ("scoped_identifier", "identifier")),
                "",
            )
        elif node.type == "import_declaration":
            target, is_static, _ = _import_target(node)
            (static_imports if is_static else imports).append(target)
    visit(tree.root_node, ())

    result.source_file = SourceFile(
        file_path=rel_path,
        package=package,
        imports=tuple(imports),
        static_imports=tuple(static_imports),
        classes=tuple(classes),
    )
    return result


def _java_files(repo_root: Path) -> list[str]:
    found = []
    for dirpath, dirnames, filenames in os.walk(repo_root):
        dirnames.sort()
        for name in filenames:
            if name.endswith(".java"):
                found.append(Path(dirpath, name).relative_to(repo_root).as_posix())
    return sorted(found)


def extract_corpus(
    repo_root: str | os.PathLike[str],
    exclusion: ExclusionRules | None = None,
    threads: int | None = None,
) -> Corpus:
    """Extract every production method under ``repo_root``.

    Files are parsed concurrently; results are merged in (file_path,
    start_line) order so ids are stable across runs. Unreadable files, and
    any method starting on the same line as an earlier one, are recorded in
    ``Corpus.skipped``.

    Raises:
        FileNotFoundError: ``repo_root`` does not exist.
        EmptyCorpusError: no production method was found.
    """
    root = Path(repo_root).resolve()
    if not root.is_dir():
        raise FileNotFoundError(f"repository root not found: {root}")
    exclusion = exclusion or ExclusionRules()

    all_files = _java_files(root)
    excluded = [p for p in all_files if exclusion.is_test(p)]
    production = [p for p in all_files if not exclusion.is_test(p)]

    if threads == 1 or len(production) < 2:
        results = [_extract_file(root, p) for p in production]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda p: _extract_file(root, p), production))

    skipped: list[tuple[str, str]] = []
    raw_methods: list[dict[str, Any]] = []
    files: list[SourceFile] = []
    for res in results:
        if res.error is not None:
            logger.warning("skipping %s: %s", res.rel_path, res.error)
            skipped.append((res.rel_path, res.error))
            continue
        raw_methods.extend(res.methods)
        if res.source_file is not None:
            files.append(res.source_file)

    if not raw_methods:
        raise EmptyCorpusError(
            f"no production methods found under {root} "
            f"({len(excluded)} test files excluded, {len(skipped)} unreadable)",
            excluded,
        )

    raw_methods.sort(key=lambda m: (m["file_path"], m["start_line"]))
    kept: list[dict[str, Any]] = []
    for m in raw_methods:
        prev = kept[-1] if kept else None
        if prev is not None and (prev["file_path"], prev["start_line"]) == (m["file_path"], m["start_line"]):
            # Line-based lookups need one method per start line; keep the first.
            reason = f"method {m['method_name']} dropped: shares line {m['start_line']} with {prev['method_name']}"
            logger.warning("%s: %s", m["file_path"], reason)
            skipped.append((m["file_path"], reason))
            continue
        kept.append(m)
    methods = tuple(MethodRecord(method_id=i, **m) for i, m in enumerate(kept))
    return Corpus(
        repo_root=str(root),
        methods=methods,
        excluded_test_files=tuple(excluded),
        files=tuple(files),
        skipped=tuple(skipped),
    )


def corpus_from_methods(methods: Iterable[MethodRecord], repo_root: str = "") -> Corpus:
    """Build a corpus from already constructed records (mainly for tests)."""
    return Corpus(repo_root=repo_root, methods=tuple(methods))
