"""Static call graph and class graph construction over a :class:`Corpus`.

Callees are identified by (class, method name, argument count) only;
parameter and return types are never inferred. That has three
consequences callers should know about:

* every overload with a matching arity receives an edge,
* for nested invocations only the outermost call is resolved,
* calls on receivers whose type is not syntactically declared are counted
  as ``unknown_receiver``.
"""

from __future__ import annotations

import logging
from collections import Counter
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.sparse as sp

from . import _java
from .corpus import ClassDecl, Corpus, MethodRecord, SourceFile

logger = logging.getLogger(__name__)

__all__ = [
    "CallGraph",
    "CallSite",
    "ClassGraph",
    "Resolver",
    "UnresolvedCall",
    "build_call_graph",
    "build_class_graph",
    "extract_call_sites",
    "resolve_call",
    "undirected_adjacency",
]

EXTERNAL = "external"
UNKNOWN_RECEIVER = "unknown_receiver"

_CALL_NODES = frozenset({"method_invocation", "object_creation_expression", "explicit_constructor_invocation"})

ClassKey = tuple[str, tuple[str, ...]]  # (file_path, class chain)


class UnresolvedCall(Exception):
    """A call site whose callee is not a method of the corpus."""

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason


# ---------------------------------------------------------------------------
# Graph containers
# ---------------------------------------------------------------------------


def undirected_adjacency(n_nodes: int, edges: Iterable[tuple[int, int]]) -> sp.csr_matrix:
    """Symmetric 0/1 adjacency without self loops."""
    pairs = np.array([e for e in edges if e[0] != e[1]], dtype=np.int64).reshape(-1, 2)
    rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
    cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
    adj = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n_nodes, n_nodes)).tocsr()
    adj.data[:] = 1.0  # duplicates were summed
    adj.sort_indices()
    return adj


@dataclass(frozen=True)
class CallGraph:
    """Directed caller -> callee graph.

    ``call_sites`` counts every outermost call expression scanned and
    ``resolved_sites`` those that matched at least one corpus method, so
    ``resolved_sites + sum(unresolved.values()) == call_sites``.
    """

    n_nodes: int
    edges: tuple[tuple[int, int], ...]
    unresolved: dict[str, int] = field(default_factory=dict)
    call_sites: int = 0
    resolved_sites: int = 0

    def __post_init__(self):
        for a, b in self.edges:
            if not (0 <= a < self.n_nodes and 0 <= b < self.n_nodes):
                raise ValueError(f"edge ({a}, {b}) outside 0..{self.n_nodes - 1}")
            if a == b:
                raise ValueError(f"self loop on node {a}")
        if len(set(self.edges)) != len(self.edges):
            raise ValueError("duplicate edges")

    kind = "call"

    def undirected_adjacency(self) -> sp.csr_matrix:
        return undirected_adjacency(self.n_nodes, self.edges)

    def to_json(self) -> dict[str, Any]:
        return {
            "kind": "call",
            "n_nodes": self.n_nodes,
            "edges": [list(e) for e in self.edges],
            "unresolved": dict(sorted(self.unresolved.items())),
            "call_sites": self.call_sites,
            "resolved_call_sites": self.resolved_sites,
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> CallGraph:
        return cls(
            n_nodes=int(obj["n_nodes"]),
            edges=tuple(sorted((int(a), int(b)) for a, b in obj["edges"])),
            unresolved={str(k): int(v) for k, v in obj.get("unresolved", {}).items()},
            call_sites=int(obj.get("call_sites", 0)),
            resolved_sites=int(obj.get("resolved_call_sites", 0)),
        )


@dataclass(frozen=True)
class ClassGraph:
    """Undirected graph joining every pair of methods of the same class."""

    n_nodes: int
    edges: tuple[tuple[int, int], ...]

    kind = "class"

    def undirected_adjacency(self) -> sp.csr_matrix:
        return undirected_adjacency(self.n_nodes, self.edges)

    def to_json(self) -> dict[str, Any]:
        return {"kind": "class", "n_nodes": self.n_nodes, "edges": [list(e) for e in self.edges], "unresolved": {}}

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> ClassGraph:
        return cls(int(obj["n_nodes"]), tuple(sorted((int(a), int(b)) for a, b in obj["edges"])))


# ---------------------------------------------------------------------------
# Call sites
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CallSite:
    """One outermost invocation inside a method body.

    ``kind`` is ``"method"``, ``"new"``, ``"this"`` or ``"super"`` (the last
    two being explicit constructor invocations). ``receiver_kind`` describes
    the syntactic receiver of a method call: ``none``, ``this``, ``super``,
    ``name`` (identifier or dotted name), ``this_field``, ``type`` (a cast or
    object creation whose type is written out) or ``expr``.
    """

    caller_id: int
    kind: str
    name: str
    n_args: int
    receiver_kind: str = "none"
    receiver: str = ""
    line: int = 0


def _n_arguments(node) -> int:
    args = node.child_by_field_name("arguments")
    return len(_java.named_children(args)) if args is not None else 0


def _receiver(obj) -> tuple[str, str]:
    if obj is None:
        return "none", ""
    kind = obj.type
    if kind == "this":
        return "this", ""
    if kind == "super":
        return "super", ""
    if kind == "identifier":
        return "name", _java.text(obj)
    if kind == "field_access":
        target = obj.child_by_field_name("object")
        fld = obj.child_by_field_name("field")
        if target is not None and target.type == "this" and fld is not None:
            return "this_field", _java.text(fld)
        return "name", _java.text(obj).replace(" ", "")
    if kind == "scoped_identifier":
        return "name", _java.text(obj)
    if kind == "object_creation_expression":
        t = _java.type_name(obj.child_by_field_name("type"))
        return ("type", t) if t else ("expr", "")
    if kind == "parenthesized_expression":
        inner = _java.named_children(obj)
        if len(inner) == 1 and inner[0].type == "cast_expression":
            t = _java.type_name(inner[0].child_by_field_name("type"))
            return ("type", t) if t else ("expr", "")
        if len(inner) == 1:
            return _receiver(inner[0])
    return "expr", ""


def _local_types(member) -> dict[str, str]:
    """Declared types of parameters and local variables in one method."""
    types: dict[str, str] = {}

    def bind(type_node, name_node, dims=None):
        t = _java.type_name(type_node)
        name = _java.text(name_node)
        if t and name:
            types[name] = t + "[]" if dims is not None else t

    for node in _java.walk(member):
        kind = node.type
        if kind in ("formal_parameter", "catch_formal_parameter", "resource", "enhanced_for_statement"):
            type_node = node.child_by_field_name("type")
            if kind == "catch_formal_parameter":
                catch_type = next((c for c in node.named_children if c.type == "catch_type"), None)
                alts = _java.named_children(catch_type) if catch_type is not None else []
                type_node = alts[0] if len(alts) == 1 else None
            bind(type_node, node.child_by_field_name("name"), node.child_by_field_name("dimensions"))
        elif kind == "spread_parameter":
            type_node = next((c for c in node.named_children if c.type != "variable_declarator"), None)
            decl = next((c for c in node.named_children if c.type == "variable_declarator"), None)
            if decl is not None:
                t = _java.type_name(type_node)
                name = _java.text(decl.child_by_field_name("name"))
                if t and name:
                    types[name] = t + "[]"
        elif kind == "local_variable_declaration":
            type_node = node.child_by_field_name("type")
            for decl in node.children_by_field_name("declarator"):
                bind(type_node, decl.child_by_field_name("name"), decl.child_by_field_name("dimensions"))
    return types


def _collect_outermost_calls(node, out: list) -> None:
    if node.type in _CALL_NODES:
        out.append(node)
        return  # nested calls (arguments, receivers, anonymous bodies) are discarded
    for child in node.children:
        _collect_outermost_calls(child, out)


def extract_call_sites(method: MethodRecord) -> tuple[list[CallSite], dict[str, str]]:
    """Outermost call sites of ``method`` and its local variable types."""
    member = _java.parse_member(method.raw_source)
    if member is None:
        # Error-tolerant fallback: use the partial tree as is.
        tree = _java.parse(b"class __Member__ {\n" + method.raw_source.encode("utf-8") + b"\n}")
        member = tree.root_node
        logger.warning("method %d (%s) has syntax errors; call sites are best-effort", method.method_id, method.method_name)
    body = member.child_by_field_name("body") if member.type in _java.METHOD_NODES else member
    if body is None:
        return [], {}

    nodes: list = []
    _collect_outermost_calls(body, nodes)
    sites: list[CallSite] = []
    for node in nodes:
        line = node.start_point[0]  # wrapper adds one line; member line 1 is row 1
        if node.type == "method_invocation":
            rkind, rtext = _receiver(node.child_by_field_name("object"))
            sites.append(
                CallSite(
                    method.method_id,
                    "method",
                    _java.text(node.child_by_field_name("name")),
                    _n_arguments(node),
                    rkind,
                    rtext,
                    line,
                )
            )
        elif node.type == "object_creation_expression":
            t = _java.type_name(node.child_by_field_name("type")) or ""
            sites.append(CallSite(method.method_id, "new", t, _n_arguments(node), "type", t, line))
        else:
            ctor = node.child_by_field_name("constructor")
            kind = "super" if ctor is not None and ctor.type == "super" else "this"
            sites.append(CallSite(method.method_id, kind, "", _n_arguments(node), kind, "", line))
    return sites, _local_types(member)


# ---------------------------------------------------------------------------
# Resolution
# ---------------------------------------------------------------------------


class Resolver:
    """Name-resolution index over one corpus.

    Class lookup for a simple type name tries, in order: classes visible
    lexically in the same file, explicit single-type imports, the same
    package, then wildcard imports. A fully qualified name is looked up
    directly.
    """

    def __init__(self, corpus: Corpus):
        self.corpus = corpus
        self.files: dict[str, SourceFile] = dict(corpus.source_files)
        self.classes: dict[ClassKey, ClassDecl] = {}
        self.class_package: dict[ClassKey, str] = {}
        self.by_fqn: dict[str, list[ClassKey]] = {}
        for sf in corpus.files:
            for decl in sf.classes:
                key = (sf.file_path, decl.chain)
                self.classes[key] = decl
                self.class_package[key] = sf.package
                fqn = ".".join(([sf.package] if sf.package else []) + list(decl.chain))
                self.by_fqn.setdefault(fqn, []).append(key)
        self.members: dict[ClassKey, dict[tuple[str, int], list[int]]] = {}
        for m in corpus.methods:
            key = (m.file_path, m.enclosing_class_chain)
            self.members.setdefault(key, {}).setdefault((m.method_name, m.n_args), []).append(m.method_id)
            if key not in self.classes:
                # Corpus built without file facts: still index the class.
                self.classes[key] = ClassDecl(m.enclosing_class_chain)
                self.class_package.setdefault(key, "")
                self.by_fqn.setdefault(".".join(m.enclosing_class_chain), []).append(key)

    # -- types ---------------------------------------------------------

    def _fqn(self, name: str) -> ClassKey | None:
        keys = self.by_fqn.get(name)
        return keys[0] if keys else None

    def resolve_type(self, name: str | None, context: ClassKey) -> ClassKey | None:
        """Corpus class named ``name`` as seen from class ``context``; None if external."""
        if not name or name.endswith("[]"):
            return None
        file_path, chain = context
        head, _, rest = name.partition(".")
        start = self._resolve_simple(head, file_path, chain)
        if start is not None:
            if not rest:
                return start
            nested = (start[0], start[1] + tuple(rest.split(".")))
            if nested in self.classes:
                return nested
        return self._fqn(name) if "." in name else None

    def _resolve_simple(self, name: str, file_path: str, chain: tuple[str, ...]) -> ClassKey | None:
        for depth in range(len(chain), -1, -1):
            key = (file_path, chain[:depth] + (name,))
            if key in self.classes:
                return key
        sf = self.files.get(file_path)
        imports = sf.imports if sf else ()
        package = sf.package if sf else self.class_package.get((file_path, chain), "")
        for imp in imports:
            if not imp.endswith(".*") and imp.rsplit(".", 1)[-1] == name:
                return self._fqn(imp)
        found = self._fqn(f"{package}.{name}" if package else name)
        if found is not None:
            return found
        for imp in imports:
            if imp.endswith(".*"):
                found = self._fqn(f"{imp[:-2]}.{name}")
                if found is not None:
                    return found
        return None

    def superclass_of(self, key: ClassKey) -> ClassKey | None:
        decl = self.classes.get(key)
        if decl is None or not decl.superclass:
            return None
        # The extends clause is resolved from the enclosing scope of the class.
        return self.resolve_type(decl.superclass, (key[0], key[1][:-1]))

    # -- members -------------------------------------------------------

    def find_method(self, key: ClassKey, name: str, n_args: int) -> list[int]:
        """Matches in ``key`` or, failing that, up its ``extends`` chain."""
        seen: set[ClassKey] = set()
        current: ClassKey | None = key
        while current is not None and current not in seen:
            seen.add(current)
            hits = self.members.get(current, {}).get((name, n_args))
            if hits:
                return hits
            current = self.superclass_of(current)
        return []

    def field_type(self, key: ClassKey, name: str) -> str | None:
        seen: set[ClassKey] = set()
        current: ClassKey | None = key
        while current is not None and current not in seen:
            seen.add(current)
            decl = self.classes.get(current)
            if decl is not None:
                for fname, ftype in decl.fields:
                    if fname == name:
                        return ftype
            current = self.superclass_of(current)
        return None

    def _lexical_field_type(self, key: ClassKey, name: str) -> tuple[str, ClassKey] | None:
        file_path, chain = key
        for depth in range(len(chain), 0, -1):
            scope = (file_path, chain[:depth])
            t = self.field_type(scope, name)
            if t is not None:
                return t, scope
        return None

    def _static_import_targets(self, file_path: str, name: str) -> list[str]:
        sf = self.files.get(file_path)
        targets = []
        for imp in sf.static_imports if sf else ():
            owner, _, member = imp.rpartition(".")
            if member == name or member == "*":
                targets.append(owner)
        return targets

    def resolve(self, site: CallSite, local_types: dict[str, str] | None = None) -> frozenset[int]:
        """Callee ids for ``site``; raises :class:`UnresolvedCall` if none."""
        caller = self.corpus[site.caller_id]
        here: ClassKey = (caller.file_path, caller.enclosing_class_chain)
        local_types = local_types or {}

        if site.kind in ("this", "super"):
            target = here if site.kind == "this" else self.superclass_of(here)
            if target is None:
                raise UnresolvedCall(EXTERNAL, "super constructor outside corpus")
            hits = self.members.get(target, {}).get((target[1][-1], site.n_args))
            if not hits:
                raise UnresolvedCall(EXTERNAL, "no matching constructor")
            return frozenset(hits)

        if site.kind == "new":
            target = self.resolve_type(site.name, here)
            if target is None:
                raise UnresolvedCall(EXTERNAL, f"new {site.name}")
            hits = self.members.get(target, {}).get((target[1][-1], site.n_args))
            if not hits:
                raise UnresolvedCall(EXTERNAL, f"implicit or library constructor of {site.name}")
            return frozenset(hits)

        rk = site.receiver_kind
        if rk == "none":
            file_path, chain = here
            for depth in range(len(chain), 0, -1):
                hits = self.find_method((file_path, chain[:depth]), site.name, site.n_args)
                if hits:
                    return frozenset(hits)
            for owner in self._static_import_targets(file_path, site.name):
                key = self.resolve_type(owner, here)
                if key is not None:
                    hits = self.find_method(key, site.name, site.n_args)
                    if hits:
                        return frozenset(hits)
            raise UnresolvedCall(EXTERNAL, f"{site.name}/{site.n_args} not declared in corpus hierarchy")

        if rk == "this":
            target = here
        elif rk == "super":
            target = self.superclass_of(here)
            if target is None:
                raise UnresolvedCall(EXTERNAL, "superclass outside corpus")
        elif rk == "type":
            target = self.resolve_type(site.receiver, here)
            if target is None:
                raise UnresolvedCall(EXTERNAL, site.receiver)
        elif rk == "this_field":
            ftype = self.field_type(here, site.receiver)
            if ftype is None:
                raise UnresolvedCall(UNKNOWN_RECEIVER, f"this.{site.receiver}")
            target = self.resolve_type(ftype, here)
            if target is None:
                raise UnresolvedCall(EXTERNAL, ftype)
        elif rk == "name":
            target = self._resolve_named_receiver(site.receiver, here, local_types)
        else:
            raise UnresolvedCall(UNKNOWN_RECEIVER, "receiver is a computed expression")

        hits = self.find_method(target, site.name, site.n_args)
        if not hits:
            raise UnresolvedCall(EXTERNAL, f"{site.name}/{site.n_args} not declared in corpus hierarchy")
        return frozenset(hits)

    def _resolve_named_receiver(self, receiver: str, here: ClassKey, local_types: dict[str, str]) -> ClassKey:
        if "." not in receiver:
            declared = local_types.get(receiver)
            scope = here
            if declared is None:
                found = self._lexical_field_type(here, receiver)
                if found is not None:
                    declared, scope = found
            if declared is not None:
                target = self.resolve_type(declared, scope)
                if target is None:
                    raise UnresolvedCall(EXTERNAL, declared)
                return target
            target = self.resolve_type(receiver, here)
            if target is not None:
                return target
            if receiver[:1].isupper():
                raise UnresolvedCall(EXTERNAL, receiver)
            raise UnresolvedCall(UNKNOWN_RECEIVER, receiver)
        target = self.resolve_type(receiver, here)
        if target is not None:
            return target
        head = receiver.split(".", 1)[0]
        if head[:1].isupper() and head not in local_types and self._lexical_field_type(here, head) is None:
            # e.g. System.out: a member of a class outside the corpus
            raise UnresolvedCall(EXTERNAL, receiver)
        raise UnresolvedCall(UNKNOWN_RECEIVER, receiver)


def resolve_call(
    site: CallSite,
    corpus: Corpus,
    local_types: dict[str, str] | None = None,
    resolver: Resolver | None = None,
) -> frozenset[int]:
    """Resolve one call site against ``corpus``.

    Returns every method id matching (resolved class, name, arity), searching
    the ``extends`` chain when the class itself has no match.

    Raises:
        UnresolvedCall: with reason ``external`` or ``unknown_receiver``.
    """
    return (resolver or Resolver(corpus)).resolve(site, local_types)


@dataclass
class _MethodCalls:
    edges: set[tuple[int, int]] = field(default_factory=set)
    unresolved: Counter = field(default_factory=Counter)
    sites: int = 0
    resolved: int = 0


def _method_calls(resolver: Resolver, method: MethodRecord) -> _MethodCalls:
    out = _MethodCalls()
    sites, local_types = extract_call_sites(method)
    for site in sites:
        out.sites += 1
        try:
            callees = resolver.resolve(site, local_types)
        except UnresolvedCall as exc:
            out.unresolved[exc.reason] += 1
            continue
        out.resolved += 1
        out.edges.update((method.method_id, c) for c in callees if c != method.method_id)
    return out


def build_call_graph(corpus: Corpus, threads: int | None = None) -> CallGraph:
    """Directed call graph of ``corpus``; self calls are dropped."""
    if len(corpus) == 0:
        raise ValueError("cannot build a call graph over an empty corpus")
    resolver = Resolver(corpus)
    if threads == 1:
        results = [_method_calls(resolver, m) for m in corpus.methods]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda m: _method_calls(resolver, m), corpus.methods))

    edges: set[tuple[int, int]] = set()
    unresolved: Counter = Counter()
    sites = resolved = 0
    for res in results:
        edges |= res.edges
        unresolved.update(res.unresolved)
        sites += res.sites
        resolved += res.resolved
    return CallGraph(
        n_nodes=len(corpus),
        edges=tuple(sorted(edges)),
        unresolved=dict(sorted(unresolved.items())),
        call_sites=sites,
        resolved_sites=resolved,
    )


def build_class_graph(corpus: Corpus) -> ClassGraph:
    """Complete graph inside every (file_path, enclosing class chain) group."""
    if len(corpus) == 0:
        raise ValueError("cannot build a class graph over an empty corpus")
    groups: dict[tuple[str, tuple[str, ...]], list[int]] = {}
    for m in corpus.methods:
        groups.setdefault((m.file_path, m.enclosing_class_chain), []).append(m.method_id)
    edges = [(a, b) for ids in groups.values() for i, a in enumerate(ids) for b in ids[i + 1 :]]
    return ClassGraph(len(corpus), tuple(sorted(edges)))


def graph_from_json(obj: dict[str, Any]) -> CallGraph | ClassGraph:
    kind = obj.get("kind", "call")
    if kind == "class":
        return ClassGraph.from_json(obj)
    return CallGraph.from_json(obj)


def method_label(corpus: Corpus, method_id: int) -> str:
    m = corpus[method_id]
    return f"{'.'.join(m.enclosing_class_chain)}.{m.method_name}/{m.n_args}"


def labeled_edges(corpus: Corpus, edges: Sequence[tuple[int, int]]) -> list[tuple[str, str]]:
    return [(method_label(corpus, a), method_label(corpus, b)) for a, b in edges]
