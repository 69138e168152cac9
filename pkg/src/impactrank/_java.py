"""Thin wrapper around the tree-sitter Java grammar."""

from __future__ import annotations

import threading
from collections.abc import Iterator

import tree_sitter_java
from tree_sitter import Language, Node, Parser, Tree

JAVA = Language(tree_sitter_java.language())

CLASS_NODES = frozenset(
    {
        "class_declaration",
        "interface_declaration",
        "enum_declaration",
        "record_declaration",
        "annotation_type_declaration",
    }
)
METHOD_NODES = frozenset(
    {"method_declaration", "constructor_declaration", "compact_constructor_declaration"}
)
COMMENT_NODES = frozenset({"line_comment", "block_comment"})
LITERAL_TEXT_NODES = frozenset({"string_literal", "character_literal", "text_block"})

# Parser objects are not safe to share between threads.
_local = threading.local()


def parse(source: bytes) -> Tree:
    parser = getattr(_local, "parser", None)
    if parser is None:
        parser = _local.parser = Parser(JAVA)
    return parser.parse(source)


def text(node: Node | None) -> str:
    if node is None:
        return ""
    return node.text.decode("utf-8", errors="replace")


def named_children(node: Node) -> list[Node]:
    """Named children with comments filtered out."""
    return [c for c in node.named_children if c.type not in COMMENT_NODES]


def walk(node: Node) -> Iterator[Node]:
    """Pre-order traversal."""
    stack = [node]
    while stack:
        current = stack.pop()
        yield current
        stack.extend(reversed(current.children))


def count_parameters(params: Node | None) -> int:
    if params is None:
        return 0
    return sum(1 for c in params.named_children if c.type in ("formal_parameter", "spread_parameter"))


def type_name(node: Node | None) -> str | None:
    """Declared type as written, with generic arguments stripped.

    Returns None for primitive, inferred (``var``) or missing types. Array
    types are kept with their ``[]`` suffix so callers can reject them.
    """
    if node is None:
        return None
    kind = node.type
    if kind in ("integral_type", "floating_point_type", "boolean_type", "void_type"):
        return None
    if kind == "generic_type":
        base = next((c for c in node.named_children if c.type != "type_arguments"), None)
        return type_name(base)
    if kind == "array_type":
        inner = type_name(node.child_by_field_name("element"))
        return f"{inner}[]" if inner else None
    if kind == "scoped_type_identifier":
        parts = [type_name(c) for c in node.named_children if c.type != "annotation"]
        if any(p is None for p in parts):
            return None
        return ".".join(p for p in parts if p)
    if kind == "annotated_type":
        inner = [c for c in node.named_children if c.type not in ("annotation", "marker_annotation")]
        return type_name(inner[0]) if inner else None
    name = text(node)
    if name == "var":
        return None
    return name


_WRAP_HEAD = b"class __Member__ {\n"


def parse_member(source: str) -> Node | None:
    """Parse one class member (method or constructor) on its own.

    The source is wrapped in a synthetic class so constructors parse too.
    Returns the member node, or None when the source has syntax errors or
    is not exactly one member.
    """
    tree = parse(_WRAP_HEAD + source.encode("utf-8") + b"\n}")
    root = tree.root_node
    if root.has_error or len(root.named_children) != 1:
        return None
    body = root.named_children[0].child_by_field_name("body")
    members = named_children(body) if body is not None else []
    if len(members) != 1:
        return None
    return members[0]
