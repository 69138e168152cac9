"""Shared builders for test corpora and repositories."""

from __future__ import annotations

from pathlib import Path

from impactrank.corpus import Corpus, MethodRecord

RESOURCES = Path(__file__).parent / "resources"
FIXTURE_REPO = RESOURCES / "minirepo"


def make_corpus(token_lists, files=None, classes=None) -> Corpus:
    """Synthetic corpus with one method per token list."""
    methods = []
    for i, tokens in enumerate(token_lists):
        path = files[i] if files else f"F{i}.java"
        cls = classes[i] if classes else path.split(".")[0]
        methods.append(
            MethodRecord(
                method_id=i,
                file_path=path,
                class_name=cls,
                enclosing_class_chain=(cls,),
                method_name=f"m{i}",
                n_args=0,
                start_line=10 * i + 1,
                end_line=10 * i + 5,
                raw_source="",
                tokens=tuple(tokens),
            )
        )
    return Corpus(repo_root="", methods=tuple(methods))


def write_repo(root: Path, files: dict[str, str]) -> Path:
    for rel, src in files.items():
        path = root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(src, encoding="utf-8")
    return root
